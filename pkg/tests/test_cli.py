import subprocess
import sys

import numpy as np
import pytest

from deltastab.cli import main
from deltastab.output import read_series_csv
from deltastab.riccati import load_pi

SMALL = """
[mesh]
nx = 6
ny = 6
[physics]
a_expr = "{a}"
b_expr = ["x1*(x1 - 1)*x2", "0"]
autonomous_freeze = {freeze}
[actuators]
M = 1
[feedback]
{fb}
[time]
dt = 1e-2
T = {T}
record_every = 5
snapshot_times = [0.0, 0.5]
"""


def write_cfg(tmp_path, name="c", a="1 - 2*cos(t + x2)", freeze="false", fb='kind = "explicit"\nlambda = 5.0',
              T=1.0):
    p = tmp_path / f"{name}.toml"
    p.write_text(SMALL.format(a=a, freeze=freeze, fb=fb, T=T))
    return p


def test_simulate_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"series.csv", "report.txt", "norms.svg", "snapshot_t0.txt", "snapshot_t0.5.txt"}
    data = read_series_csv(out / "series.csv")
    assert len(data["t"]) == 21 and "u_3" in data
    report = (out / "report.txt").read_text()
    assert report.startswith("# deltastab")
    assert "truncated_cost" in report and "truncated false" in report
    for f in names:
        assert (out / f).read_text().count("config: {") >= 1


def test_simulate_reproducible_bytes(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "a")]) == 0
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "b")]) == 0
    for f in ("series.csv", "report.txt", "norms.svg", "snapshot_t0.5.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_env_output_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    monkeypatch.setenv("DELTASTAB_OUT", str(tmp_path / "env"))
    assert main(["simulate", str(cfg)]) == 0
    assert (tmp_path / "env" / "series.csv").exists()
    cfg2 = write_cfg(tmp_path, name="d")
    assert main(["simulate", str(cfg), str(cfg2)]) == 0
    assert (tmp_path / "env" / "c" / "series.csv").exists() and (tmp_path / "env" / "d" / "series.csv").exists()


def test_simulate_config_errors(tmp_path, capsys):
    bad = write_cfg(tmp_path, a="sin(")
    assert main(["simulate", str(bad), "-o", str(tmp_path / "o")]) == 1
    assert "column" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.toml")]) == 1


def test_simulate_blowup_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, a="-197", fb='kind = "none"', T=5.0)
    out = tmp_path / "o"
    with np.errstate(over="ignore", invalid="ignore"):
        assert main(["simulate", str(cfg), "-o", str(out)]) == 2
    data = read_series_csv(out / "series.csv")
    assert 0 < data["t"][-1] < 5.0
    assert "truncated true" in (out / "report.txt").read_text()


def test_riccati_simulation_coarse_to_fine(tmp_path):
    fb = 'kind = "riccati"\nmu_ric = 1.0\nM1 = 10\nriccati_refinements = 0'
    cfg = write_cfg(tmp_path, freeze="true", fb=fb, T=1.0)
    text = cfg.read_text().replace("nx = 6\nny = 6", "nx = 6\nny = 6\nrefinements = 1")
    cfg.write_text(text)
    out = tmp_path / "o"
    assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "optimal_cost_estimate" in report and "riccati_N: 49" in report
    # time-dependent coefficients are refused for the Riccati feedback
    cfg2 = write_cfg(tmp_path, name="td", freeze="false", fb=fb)
    assert main(["simulate", str(cfg2), "-o", str(tmp_path / "o2")]) == 1


def test_pi_import(tmp_path):
    fb = 'kind = "riccati"\nmu_ric = 1.0\nM1 = 10'
    cfg = write_cfg(tmp_path, freeze="true", fb=fb)
    pi = tmp_path / "pi.mat"
    assert main(["solve-riccati", str(cfg), "-o", str(pi)]) == 0
    Pi, meta = load_pi(pi)
    assert Pi.shape == (49, 49) and meta["N"] == 49
    assert (tmp_path / "certificate.txt").exists()
    cfg2 = write_cfg(tmp_path, name="imp", freeze="true", fb=fb + f"\npi_import = '{pi}'")
    assert main(["simulate", str(cfg2), "-o", str(tmp_path / "a")]) == 0
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "b")]) == 0
    a = read_series_csv(tmp_path / "a" / "series.csv")
    b = read_series_csv(tmp_path / "b" / "series.csv")
    assert np.allclose(a["vprime_norm"], b["vprime_norm"], rtol=1e-10)
    # a Pi for another mesh is refused
    other = cfg2.read_text().replace("nx = 6\nny = 6", "nx = 7\nny = 7")
    cfg3 = tmp_path / "other.toml"
    cfg3.write_text(other)
    assert main(["simulate", str(cfg3), "-o", str(tmp_path / "c")]) == 1


def test_solve_riccati_bundled(tmp_path, capsys):
    out = tmp_path / "pi.mat"
    assert main(["solve-riccati", "fig6_ric_rho0", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "closed_loop_abscissa -" in text and "FAIL" not in text
    assert load_pi(out)[0].shape == (196, 196)
    assert main(["solve-riccati", "fig3_M2_rho0", "-o", str(out)]) == 1


def test_solve_riccati_scalar_fixture(tmp_path, capsys):
    p = tmp_path / "s.toml"
    p.write_text("[matrices]\nL = [[-1.0]]\nB = [[1.0]]\nC = [[1.0]]\n")
    assert main(["solve-riccati", str(p), "-o", str(tmp_path / "pi.npz")]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("pi ")][0]
    assert float(line.split()[1]) == pytest.approx(np.sqrt(2) - 1, abs=1e-10)
    p.write_text("[matrices]\nL = [[1.0]]\nB = [[0.0]]\nC = [[1.0]]\n")
    assert main(["solve-riccati", str(p), "-o", str(tmp_path / "pi.npz")]) == 3


def test_solve_riccati_zero_cost(tmp_path):
    cfg = write_cfg(tmp_path, a="3", freeze="true", fb='kind = "riccati"\nmu_ric = 0.0\nM1 = 0')
    out = tmp_path / "pi.npz"
    assert main(["solve-riccati", str(cfg), "-o", str(out)]) == 0
    assert np.all(load_pi(out)[0] == 0)


def test_gap_constant(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    text = cfg.read_text().replace("nx = 6\nny = 6", "nx = 8\nny = 8\nrefinements = 1")
    cfg.write_text(text)
    assert main(["gap-constant", str(cfg), "--M", "0,1,2"]) == 0
    rows = [ln.split(",") for ln in capsys.readouterr().out.strip().splitlines()]
    assert rows[0] == ["M", "M_sigma", "xi"]
    assert [r[:2] for r in rows[1:]] == [["0", "0"], ["1", "3"], ["2", "12"]]
    xi = [float(r[2]) for r in rows[1:]]
    assert xi[0] == pytest.approx(1.0, abs=1e-10) and xi[0] < xi[1] < xi[2]
    assert main(["gap-constant", str(cfg), "--M", ""]) == 0
    assert capsys.readouterr().out == ""
    assert main(["gap-constant", str(cfg), "--M", "x"]) == 1


def test_compare(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["simulate", str(cfg), "-o", str(tmp_path / "a")])
    cfg2 = write_cfg(tmp_path, name="e", T=0.5)
    main(["simulate", str(cfg2), "-o", str(tmp_path / "b")])
    svg = tmp_path / "cmp.svg"
    assert main(["compare", str(tmp_path / "a" / "series.csv"), str(tmp_path / "b" / "series.csv"),
                 "-o", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 2
    assert main(["compare", str(tmp_path / "a" / "series.csv"), "-o", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 1
    assert main(["compare", str(tmp_path / "nope.csv"), "-o", str(svg)]) == 1


def test_mesh_info_and_actuators(tmp_path, capsys):
    assert main(["mesh-info", "fig3_M2_rho2", "--export", str(tmp_path / "m.txt")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].startswith("0,196,338,52,1,")
    assert out[3].startswith("2,2809,5408,208,")
    assert "vertices 2809 triangles 5408" in (tmp_path / "m.txt").read_text()
    assert main(["place-actuators", "fig3_M2_rho0"]) == 0
    pts = np.array([[float(v) for v in ln.split()] for ln in capsys.readouterr().out.splitlines()])
    assert pts.shape == (12, 2)
    assert main(["place-actuators", "fig3_M2_rho0", "-o", str(tmp_path / "a.txt")]) == 0
    assert np.allclose(np.loadtxt(tmp_path / "a.txt"), pts)


def test_bundled_free_and_stabilized(tmp_path):
    assert main(["simulate", "fig2_lambda0", "-o", str(tmp_path / "f2")]) == 0
    v = read_series_csv(tmp_path / "f2" / "series.csv")["vprime_norm"]
    assert np.all(np.diff(v) > 0)
    assert main(["simulate", "fig3_M2_rho0", "-o", str(tmp_path / "f3")]) == 0
    v = read_series_csv(tmp_path / "f3" / "series.csv")["vprime_norm"]
    assert v[-1] < 0.1 * v[0]


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "deltastab.cli", "list-configs"], capture_output=True, text=True)
    assert r.returncode == 0 and "fig6_ric_rho0" in r.stdout

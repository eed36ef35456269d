import numpy as np
import pytest

from deltastab import benchmark
from deltastab.assembly import l_matrix
from deltastab.config import ConfigError, ExperimentConfig, bundled_config_names, bundled_config_text

EXPECTED = {f"fig2_lambda{k}" for k in (0, 10, 50, 100)} | {f"fig3_M2_rho{k}" for k in range(4)} \
    | {"fig5_explicit_aut"} | {f"fig6_ric_rho{k}" for k in range(4)} | {"fig7_ric1_rho2", "fig7_ric1_rho3"}


def test_bundled_names():
    assert set(bundled_config_names()) == EXPECTED


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_bundled_configs_load(name):
    cfg = ExperimentConfig.load(name)
    assert cfg["mesh"]["nx"] == 13 and cfg["physics"]["nu"] == 0.1
    assert cfg["time"]["dt"] == 1e-3 and cfg["time"]["T"] == 5.0
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()


def test_bundled_fields_match_benchmark(hierarchy13):
    mesh = hierarchy13[0]
    dyn = ExperimentConfig.load("fig3_M2_rho0")
    frz = ExperimentConfig.load("fig6_ric_rho0")
    a, b = dyn.fields()
    af, bf = frz.fields()
    assert a.time_dependent and not af.time_dependent
    for t in (0.0, 1.3):
        ref = l_matrix(mesh, 0.1, benchmark.reaction, benchmark.convection, t, 1.0)
        assert abs(l_matrix(mesh, 0.1, a, b, t, 1.0) - ref).max() < 1e-13
    ref0 = l_matrix(mesh, 0.1, benchmark.frozen_reaction, benchmark.frozen_convection, 0.0, 1.0)
    assert abs(l_matrix(mesh, 0.1, af, bf, 2.0, 1.0) - ref0).max() < 1e-13


def test_defaults():
    cfg = ExperimentConfig.from_toml("")
    assert cfg["feedback"]["kind"] == "none"
    assert cfg["mesh"]["refinements"] == 0
    assert "matrices" not in cfg.data


@pytest.mark.parametrize("text, fragment", [
    ("[mesh]\nnx = 4\nwhatever = 1\n", "unknown key"),
    ("[meshes]\nnx = 4\n", "unknown section"),
    ("[mesh]\nnx = 'four'\n", "wrong type"),
    ("[mesh]\nnx = true\n", "wrong type"),
    ("[feedback]\nkind = 'lqg'\n", "feedback kind"),
    ("[feedback]\nbeta = 0.0\n", "beta"),
    ("[physics]\na_expr = 'sin('\n", "column"),
    ("[physics]\nnu = -1\n", "nu"),
    ("[time]\ndt = 0.1\nT = 0.01\n", "dt"),
    ("[mesh\n", "config"),
])
def test_rejected(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        ExperimentConfig.from_toml(text)


def test_load_missing():
    with pytest.raises(ConfigError):
        ExperimentConfig.load("no_such_config_anywhere")
    assert bundled_config_text("no_such") is None


def test_output_dir_env(monkeypatch):
    cfg = ExperimentConfig.from_toml("[output]\ndir = 'here'\n")
    monkeypatch.delenv("DELTASTAB_OUT", raising=False)
    assert str(cfg.output_dir()) == "here"
    monkeypatch.setenv("DELTASTAB_OUT", "/tmp/elsewhere")
    assert str(cfg.output_dir()) == "/tmp/elsewhere"


def test_builders(tmp_path):
    cfg = ExperimentConfig.from_toml("[mesh]\nnx = 4\nny = 3\nrefinements = 2\n[domain]\nl1 = 2.0\n"
                                     "[actuators]\nM = 2\n")
    meshes = cfg.mesh_hierarchy()
    assert [m.num_triangles for m in meshes] == [24, 96, 384]
    assert meshes[-1].signed_areas().sum() == pytest.approx(2.0)
    act = cfg.actuators()
    assert act.count == 12 and np.all(act.locations[:, 0] < 2.0)
    assert cfg.actuators(0).count == 0
    custom = ExperimentConfig.from_toml("[actuators]\nbase_points = [[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]\n")
    assert np.allclose(custom.actuators().locations, [[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]])
    bad = ExperimentConfig.from_toml("[actuators]\nbase_points = [[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]]\n")
    with pytest.raises(ConfigError):
        bad.actuators()


def test_mesh_import(tmp_path, mesh4):
    from deltastab.mesh import write_mesh

    path = tmp_path / "m.txt"
    write_mesh(mesh4, path)
    cfg = ExperimentConfig.from_toml(f"[mesh]\nimport = '{path}'\n")
    m = cfg.base_mesh()
    assert m.fingerprint() == mesh4.fingerprint()

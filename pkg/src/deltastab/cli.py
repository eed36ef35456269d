"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration or input error, 2 run truncated by a
non-finite state (outputs up to the truncation are still written), 3 Riccati
solve without a stabilizing seed or with a failed certificate.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, bundled_config_names
from .expr import ExpressionError
from .mesh import PointOutsideDomain
from .output import header_block, read_series_csv, series_csv, write_snapshot
from .riccati import (CertificateFailure, NewtonDivergence, NoStabilizingInit, RiccatiProblem, certify,
                      load_pi, save_pi, solve_are)
from .simulate import SimConfig, decay_rate_fit, run_simulation
from .svgplot import log_line_plot

log = logging.getLogger("deltastab")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_RICCATI = 0, 1, 2, 3


class RiccatiFailure(RuntimeError):
    pass


def _riccati_level(cfg: ExperimentConfig) -> int:
    lvl = cfg["feedback"]["riccati_refinements"]
    return cfg["mesh"]["refinements"] if lvl is None else lvl


def _check_autonomous(cfg: ExperimentConfig) -> None:
    a, b = cfg.fields()
    if a.time_dependent or b.time_dependent:
        raise ConfigError("the algebraic Riccati equation needs time-independent coefficients; "
                          "set physics.autonomous_freeze = true")


def riccati_for(cfg: ExperimentConfig, plant):
    """Pi for ``plant`` from ``pi_import`` or a fresh Newton-Kleinman solve,
    plus a certificate of the solution."""
    fb = cfg["feedback"]
    prob = plant.riccati_problem(float(fb["mu_ric"]), float(fb["beta"]), fb["M1"])
    if fb["pi_import"]:
        Pi, meta = load_pi(fb["pi_import"])
        for key in ("mesh", "actuators"):
            if meta.get(key) != prob.meta[key]:
                raise ConfigError(f"pi_import {fb['pi_import']}: {key} hash does not match this configuration")
        for key in ("mu_ric", "beta", "M1"):
            if key in meta and meta[key] != prob.meta[key]:
                log.warning("pi_import was computed with %s = %s, config has %s", key, meta[key], prob.meta[key])
    else:
        try:
            sol = solve_are(prob, a_mat=plant.A, m_mat=plant.M, B=plant.B)
        except (NoStabilizingInit, NewtonDivergence) as exc:
            raise RiccatiFailure(str(exc)) from exc
        Pi = sol.Pi
    return prob, Pi, certify(Pi, prob)


@dataclass
class ExperimentResult:
    series: object
    cost: object
    plant: object
    extra: dict
    certificate: object = None


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Build the plant and feedback law of ``cfg`` and integrate it."""
    fb = cfg["feedback"]
    tm = cfg["time"]
    level = cfg["mesh"]["refinements"]
    kind = fb["kind"]
    ric_level = _riccati_level(cfg) if kind == "riccati" else level
    if ric_level > level:
        raise ConfigError("feedback.riccati_refinements cannot exceed mesh.refinements")
    meshes = cfg.mesh_hierarchy(level)
    plant = cfg.plant(meshes[level])

    extra = {"beta": fb["beta"], "mu_ric": fb["mu_ric"], "N": plant.n, "actuators": plant.B.shape[1]}
    cert = None
    if kind == "none":
        law = plant.zero_law()
    elif kind == "explicit":
        law = plant.explicit_law(float(fb["lambda"]))
    else:
        if not cfg.frozen:
            _check_autonomous(cfg)
        coarse = plant if ric_level == level else cfg.plant(meshes[ric_level])
        _, Pi, cert = riccati_for(cfg, coarse)
        if not cert.ok:
            raise RiccatiFailure("; ".join(cert.lines()))
        law = plant.riccati_law(Pi, float(fb["beta"]), coarse=None if coarse is plant else coarse)
        extra["riccati_N"] = coarse.n

    sim = SimConfig(plant, cfg.initial_state(), float(tm["dt"]), float(tm["T"]), law,
                    mu_ric=float(fb["mu_ric"]), beta=float(fb["beta"]), M1=fb["M1"],
                    record_every=tm["record_every"], snapshot_times=tuple(tm["snapshot_times"]))
    series, cost = run_simulation(sim)
    return ExperimentResult(series, cost, plant, extra, cert)


def run_config(cfg: ExperimentConfig, out: Path) -> int:
    """Run one simulation config and write its outputs; returns the exit code."""
    res = run_experiment(cfg)
    series, cost, plant, extra = res.series, res.cost, res.plant, res.extra
    kind = cfg["feedback"]["kind"]
    cj = cfg.to_json()

    out.mkdir(parents=True, exist_ok=True)
    (out / "series.csv").write_text(series_csv(series, cj, **extra))
    for t, y in series.snapshots:
        write_snapshot(out / f"snapshot_t{t:g}.txt", plant.mesh, t, y, cj)
    label = cfg.name or kind
    svg = log_line_plot([(label, series.t, series.vprime)], title=f"{label}: V' norm", ylabel="||y||_V'",
                        comment=f"deltastab config: {cj}")
    (out / "norms.svg").write_text(svg)

    v = np.array(series.vprime)
    report = {"truncated_cost": cost.truncated_cost, "optimal_cost_estimate": cost.optimal_cost_estimate,
              "vprime_initial": v[0], "vprime_final": v[-1], "t_final": series.t[-1]}
    if series.t[-1] > 1.0 and np.all(v > 0):
        report["decay_rate_1_T"] = decay_rate_fit(series, (1.0, series.t[-1]))
    lines = [f"{k} {float(x):.17g}" for k, x in report.items() if x is not None]
    lines.append(f"truncated {str(series.truncated).lower()}")
    (out / "report.txt").write_text(header_block(cj, **extra) + "\n".join(lines) + "\n")
    print(f"{label}: {out}/series.csv ({len(series.t)} records, final V' norm {v[-1]:.4g})")
    return EXIT_BLOWUP if series.truncated else EXIT_OK


def _out_dir(cfg: ExperimentConfig, override, multiple: bool) -> Path:
    if override:
        base = Path(override)
        return base / cfg.name if multiple else base
    env = os.environ.get("DELTASTAB_OUT")
    if env:
        return Path(env) / cfg.name if multiple else Path(env)
    return Path(cfg["output"]["dir"])


def _simulate_one(args):
    cfg_name, out = args
    try:
        return run_config(ExperimentConfig.load(cfg_name), Path(out))
    except (ConfigError, ExpressionError, PointOutsideDomain, OSError) as exc:
        print(f"error: {cfg_name}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RiccatiFailure, CertificateFailure) as exc:
        print(f"error: {cfg_name}: Riccati solve failed: {exc}", file=sys.stderr)
        return EXIT_RICCATI


def cmd_simulate(ns) -> int:
    jobs = []
    for name in ns.configs:
        try:
            cfg = ExperimentConfig.load(name)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        jobs.append((name, str(_out_dir(cfg, ns.output, len(ns.configs) > 1))))
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(ns.jobs) as pool:
            codes = list(pool.map(_simulate_one, jobs))
    else:
        codes = [_simulate_one(j) for j in jobs]
    return max(codes)


def _matrix_problem(cfg: ExperimentConfig) -> RiccatiProblem:
    mats = cfg["matrices"]
    if mats["L"] is None or mats["B"] is None:
        raise ConfigError("[matrices] needs L and B")
    L = np.atleast_2d(np.array(mats["L"], dtype=float))
    n = L.shape[0]
    beta = float(cfg["feedback"]["beta"])
    Bb = np.array(mats["B"], dtype=float).reshape(n, -1) / np.sqrt(beta)
    C = np.zeros((0, n)) if mats["C"] is None else np.array(mats["C"], dtype=float).reshape(-1, n)
    return RiccatiProblem(L, Bb, C, beta=beta, mu_ric=float(cfg["feedback"]["mu_ric"]),
                          meta={"source": "matrices", "beta": beta, "N": n})


def cmd_solve_riccati(ns) -> int:
    try:
        cfg = ExperimentConfig.load(ns.config)
        if "matrices" in cfg.data:
            prob = _matrix_problem(cfg)
            sol = solve_are(prob)
            Pi = sol.Pi
        else:
            if not cfg.frozen:
                _check_autonomous(cfg)
            meshes = cfg.mesh_hierarchy(_riccati_level(cfg))
            plant = cfg.plant(meshes[-1])
            fb = cfg["feedback"]
            prob = plant.riccati_problem(float(fb["mu_ric"]), float(fb["beta"]), fb["M1"])
            sol = solve_are(prob, a_mat=plant.A, m_mat=plant.M, B=plant.B)
            Pi = sol.Pi
    except (ConfigError, ExpressionError, PointOutsideDomain, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoStabilizingInit, NewtonDivergence) as exc:
        print(f"error: Riccati solve failed: {exc}", file=sys.stderr)
        return EXIT_RICCATI

    cert = certify(Pi, prob)
    out = Path(ns.output) if ns.output else _out_dir(cfg, None, False) / "pi.mat"
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(prob.meta, config=cfg.to_json(), newton_iterations=sol.newton_iterations, seed=sol.seed)
    save_pi(out, Pi, **meta)
    report = header_block(cfg.to_json(), **{k: v for k, v in prob.meta.items()}) + \
        "\n".join(cert.lines() + [f"newton_iterations {sol.newton_iterations}", f"seed {sol.seed}"]) + "\n"
    (out.parent / "certificate.txt").write_text(report)
    for line in cert.lines():
        print(line)
    if prob.n == 1:
        print(f"pi {float(Pi[0, 0]):.17g}")
    print(f"wrote {out}")
    return EXIT_OK if cert.ok else EXIT_RICCATI


def cmd_gap_constant(ns) -> int:
    from .spectral import ConstraintRankDeficient, gap_constant

    try:
        cfg = ExperimentConfig.load(ns.config)
        Ms = [int(m) for m in ns.M.split(",") if m.strip()] if ns.M is not None else [cfg["actuators"]["M"]]
        if not Ms:
            return EXIT_OK
        mesh = cfg.mesh_hierarchy()[-1]
        plant_ops = cfg.plant(mesh, M=0)
        print("M,M_sigma,xi")
        for M in Ms:
            act = cfg.actuators(M)
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                xi = gap_constant(mesh, plant_ops.A, plant_ops.M, act)
            print(f"{M},{act.count},{float(xi):.17g}")
    except (ConfigError, ExpressionError, PointOutsideDomain, ValueError, ConstraintRankDeficient) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_compare(ns) -> int:
    curves = []
    try:
        for path in ns.series:
            data = read_series_csv(path)
            curves.append((Path(path).parent.name or Path(path).stem, data["t"], data["vprime_norm"]))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read series: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    svg = log_line_plot(curves, title="V' norm", ylabel="||y||_V'", comment="deltastab compare: " + " ".join(ns.series))
    Path(ns.output).write_text(svg)
    print(f"wrote {ns.output}")
    return EXIT_OK


def cmd_mesh_info(ns) -> int:
    try:
        cfg = ExperimentConfig.load(ns.config)
        meshes = cfg.mesh_hierarchy()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("level,vertices,triangles,boundary_vertices,area,h_max")
    for m in meshes:
        edges, _ = m.edges()
        h = np.max(np.linalg.norm(m.vertices[edges[:, 0]] - m.vertices[edges[:, 1]], axis=1))
        print(f"{m.refinement_level},{m.num_vertices},{m.num_triangles},{int(m.boundary.sum())},"
              f"{float(m.signed_areas().sum()):.17g},{float(h):.17g}")
    if ns.export:
        from .mesh import write_mesh

        write_mesh(meshes[-1], ns.export, header="\n".join(
            ln for ln in header_block(cfg.to_json()).replace("# ", "").splitlines()))
        print(f"wrote {ns.export}")
    return EXIT_OK


def cmd_place_actuators(ns) -> int:
    from .actuators import write_actuators

    try:
        cfg = ExperimentConfig.load(ns.config)
        act = cfg.actuators()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if ns.output:
        write_actuators(act, ns.output, header=f"M={act.M} count={act.count}")
        print(f"wrote {ns.output}")
    else:
        for x in act.locations:
            print(" ".join(repr(float(c)) for c in x))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltastab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run closed-loop simulations")
    s.add_argument("configs", nargs="+", help="config files or bundled config names")
    s.add_argument("-o", "--output", help="output directory (overrides config and DELTASTAB_OUT)")
    s.add_argument("-j", "--jobs", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve-riccati", help="solve and certify the algebraic Riccati equation")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="Pi output file")
    s.set_defaults(func=cmd_solve_riccati)

    s = sub.add_parser("gap-constant", help="print (M, M_sigma, xi) rows as CSV")
    s.add_argument("config")
    s.add_argument("--M", help="comma-separated list of M values (0 = no actuators)")
    s.set_defaults(func=cmd_gap_constant)

    s = sub.add_parser("compare", help="overlay V' norm curves of several series files")
    s.add_argument("series", nargs="+")
    s.add_argument("-o", "--output", default="compare.svg")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("mesh-info", help="print mesh statistics per refinement level")
    s.add_argument("config")
    s.add_argument("--export", help="write the finest mesh in text format")
    s.set_defaults(func=cmd_mesh_info)

    s = sub.add_parser("place-actuators", help="print or write actuator locations")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_place_actuators)

    sub.add_parser("list-configs", help="list bundled configs").set_defaults(
        func=lambda ns: print("\n".join(bundled_config_names())) or EXIT_OK)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())

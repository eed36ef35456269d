"""Writers and readers for series CSV files and state snapshots.

Every file starts with ``# deltastab`` provenance lines; the ``# config:``
line holds the exact configuration as JSON so a run can be reproduced from
its outputs.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from . import __version__

COLUMNS = ("t", "vprime_norm", "linf_norm", "l2_norm", "cost_running")


def provenance_lines(config_json: str, **extra) -> list[str]:
    lines = [f"deltastab {__version__}", f"config: {config_json}"]
    lines += [f"{k}: {v}" for k, v in sorted(extra.items())]
    return lines


def header_block(config_json: str, **extra) -> str:
    return "".join(f"# {ln}\n" for ln in provenance_lines(config_json, **extra))


def _num(v: float) -> str:
    return format(float(v), ".17g")


def series_csv(series, config_json: str, **extra) -> str:
    arr = series.arrays()
    nu = arr["u"].shape[1]
    buf = io.StringIO()
    buf.write(header_block(config_json, **extra))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(COLUMNS) + [f"u_{j + 1}" for j in range(nu)])
    for i in range(arr["t"].size):
        w.writerow([_num(arr[c][i]) for c in COLUMNS] + [_num(v) for v in arr["u"][i]])
    return buf.getvalue()


def read_series_csv(path) -> dict:
    """Columns of a series file as arrays plus the parsed header under ``meta``."""
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, v = body.split(":", 1)
                    meta[k.strip()] = v.strip()
                continue
            rows.append(line)
    reader = csv.reader(rows)
    try:
        names = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: no column header") from None
    data = np.array([[float(x) for x in r] for r in reader if r], dtype=float).reshape(-1, len(names))
    out = {n: data[:, i] for i, n in enumerate(names)}
    out["meta"] = meta
    return out


def config_from_header(path):
    """Rebuild the ExperimentConfig stored in an output file header."""
    from .config import ExperimentConfig

    with open(path) as fh:
        for line in fh:
            if line.startswith("# config:"):
                return ExperimentConfig(json.loads(line.split(":", 1)[1]))
    raise ValueError(f"{path}: no config header")


def write_snapshot(path, mesh, t: float, values, config_json: str) -> None:
    """Provenance header, the mesh block, then ``values N`` and one value per vertex."""
    from .mesh import format_mesh

    with open(path, "w") as fh:
        fh.write(header_block(config_json, t=_num(t)))
        fh.write(format_mesh(mesh))
        fh.write(f"values {len(values)}\n")
        fh.write("".join(_num(v) + "\n" for v in values))


def read_snapshot(path):
    """(mesh, values) from a snapshot file."""
    from .mesh import read_mesh

    mesh = read_mesh(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    k = next(i for i, ln in enumerate(lines) if ln.startswith("values "))
    n = int(lines[k].split()[1])
    return mesh, np.array([float(v) for v in lines[k + 1:k + 1 + n]])

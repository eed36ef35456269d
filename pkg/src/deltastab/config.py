"""TOML experiment configurations: schema, validation and plant construction."""

from __future__ import annotations

import copy
import json
import os
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .expr import ExpressionError, scalar_field, spatial_function, vector_field


class ConfigError(ValueError):
    pass


_NUM = (int, float)

# section -> key -> (accepted types, default); a default of None means optional
SCHEMA = {
    "mesh": {"nx": (int, 13), "ny": (int, 13), "refinements": (int, 0), "import": (str, None)},
    "domain": {"l1": (_NUM, 1.0), "l2": (_NUM, 1.0)},
    "physics": {
        "nu": (_NUM, 0.1),
        "a_expr": (str, "1"),
        "b_expr": (list, ["0", "0"]),
        "y0_expr": (str, "x1*(1 + sin(2*x2))"),
        "autonomous_freeze": (bool, False),
        "bc": (str, "neumann"),
    },
    "actuators": {"M": (int, 1), "base_points": (list, None)},
    "feedback": {
        "kind": (str, "none"),
        "lambda": (_NUM, 0.0),
        "beta": (_NUM, 1.0),
        "mu_ric": (_NUM, 1.0),
        "M1": (int, 30),
        "pi_import": (str, None),
        "riccati_refinements": (int, None),
    },
    "time": {"dt": (_NUM, 1e-3), "T": (_NUM, 5.0), "record_every": (int, 10), "snapshot_times": (list, [])},
    "output": {"dir": (str, "out")},
    "matrices": {"L": (list, None), "B": (list, None), "C": (list, None)},
}

FEEDBACK_KINDS = ("none", "explicit", "riccati")


def _validate(raw: dict) -> dict:
    cfg = {}
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, val in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            types, default = SCHEMA[section][key]
            if val is None and default is None:
                continue  # optional key left unset (JSON round trip)
            ok = isinstance(val, types) and not (types is int and isinstance(val, bool)) \
                and not (types is _NUM and isinstance(val, bool))
            if not ok:
                raise ConfigError(f"[{section}] {key} has the wrong type ({type(val).__name__})")
    for section, keys in SCHEMA.items():
        if section == "matrices" and not any(v is not None for v in raw.get(section, {}).values()):
            continue
        body = raw.get(section, {})
        cfg[section] = {k: copy.deepcopy(body.get(k, default)) for k, (_, default) in keys.items()}

    fb = cfg["feedback"]
    if fb["kind"] not in FEEDBACK_KINDS:
        raise ConfigError(f"feedback kind must be one of {FEEDBACK_KINDS}, got {fb['kind']!r}")
    if fb["beta"] <= 0:
        raise ConfigError("feedback beta must be positive")
    if fb["lambda"] < 0:
        raise ConfigError("feedback lambda must be nonnegative")
    if cfg["physics"]["nu"] <= 0:
        raise ConfigError("physics nu must be positive")
    if cfg["physics"]["bc"] not in ("neumann", "dirichlet"):
        raise ConfigError("physics bc must be 'neumann' or 'dirichlet'")
    tm = cfg["time"]
    if tm["dt"] <= 0 or tm["T"] < tm["dt"]:
        raise ConfigError("time needs dt > 0 and T >= dt")
    if cfg["mesh"]["nx"] < 1 or cfg["mesh"]["ny"] < 1 or cfg["mesh"]["refinements"] < 0:
        raise ConfigError("mesh needs nx, ny >= 1 and refinements >= 0")
    if cfg["actuators"]["M"] < 0:
        raise ConfigError("actuators M must be >= 0")
    # expressions are checked eagerly so errors surface at load time
    try:
        scalar_field(cfg["physics"]["a_expr"])
        vector_field(cfg["physics"]["b_expr"])
        spatial_function(cfg["physics"]["y0_expr"])
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


class ExperimentConfig:
    def __init__(self, data: dict, name: str = "", source: str | None = None):
        self.data = _validate(data)
        self.name = name
        self.source = source

    def __getitem__(self, section):
        return self.data[section]

    @classmethod
    def from_toml(cls, text: str, name: str = "") -> "ExperimentConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{name or 'config'}: {exc}") from None
        return cls(raw, name=name, source=text)

    @classmethod
    def load(cls, path_or_name) -> "ExperimentConfig":
        path = Path(path_or_name)
        if path.exists():
            return cls.from_toml(path.read_text(), name=path.stem)
        bundled = bundled_config_text(str(path_or_name))
        if bundled is None:
            raise ConfigError(f"no config file or bundled config named {path_or_name!r}")
        return cls.from_toml(bundled, name=str(path_or_name))

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str, name: str = "") -> "ExperimentConfig":
        return cls(json.loads(text), name=name)

    def output_dir(self) -> Path:
        return Path(os.environ.get("DELTASTAB_OUT") or self["output"]["dir"])

    @property
    def frozen(self) -> bool:
        return self["physics"]["autonomous_freeze"]

    # builders ---------------------------------------------------------------

    def rect(self):
        from .mesh import Rect

        return Rect(float(self["domain"]["l1"]), float(self["domain"]["l2"]))

    def base_mesh(self):
        from .mesh import build_structured_mesh, read_mesh

        m = self["mesh"]
        if m["import"]:
            return read_mesh(m["import"])
        return build_structured_mesh(self.rect(), m["nx"], m["ny"])

    def mesh_hierarchy(self, levels: int | None = None) -> list:
        """Base mesh and its refinements up to ``levels`` (default: the configured count)."""
        from .mesh import refine

        levels = self["mesh"]["refinements"] if levels is None else levels
        meshes = [self.base_mesh()]
        for _ in range(levels):
            meshes.append(refine(meshes[-1]))
        return meshes

    def actuators(self, M: int | None = None):
        from .actuators import empty_actuators, place_actuators

        M = self["actuators"]["M"] if M is None else M
        if M == 0:
            return empty_actuators(2)
        base = self["actuators"]["base_points"]
        try:
            return place_actuators(self.rect(), 2, M, None if base is None else np.array(base, dtype=float))
        except ValueError as exc:
            raise ConfigError(f"actuators: {exc}") from None

    def fields(self):
        ph = self["physics"]
        freeze = ph["autonomous_freeze"]
        return scalar_field(ph["a_expr"], freeze), vector_field(ph["b_expr"], freeze)

    def initial_state(self):
        return spatial_function(self["physics"]["y0_expr"])

    def plant(self, mesh, M: int | None = None):
        from .simulate import Plant

        a, b = self.fields()
        return Plant(mesh, float(self["physics"]["nu"]), a, b, self.actuators(M), self["physics"]["bc"])


def bundled_config_names() -> list[str]:
    pkg = resources.files("deltastab") / "configs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".toml"))


def bundled_config_text(name: str) -> str | None:
    res = resources.files("deltastab") / "configs" / f"{name}.toml"
    return res.read_text() if res.is_file() else None

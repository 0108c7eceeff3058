"""Run configuration: defaults, file loading, dotted overrides, validation and presets."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from .discretization import QuadratureOptions, build_mesh
from .exceptions import ConfigError, MixnlError
from .measure import SpectralMeasure, density_from_spec, from_atoms, from_density
from .nonlinearity import nonlinearity_from_spec

__all__ = ["DEFAULTS", "PRESETS", "RunConfig", "load_config", "apply_override", "preset"]

DEFAULTS: dict = {
    "mesh": {
        "omega": [-1.0, 1.0],
        "collar_R": 8.0,
        "n_in": 128,
        "n_ext": 32,
        "grading": "auto",
        "quad": {"subdiv": 6, "order": 4, "tol": 1e-10},
    },
    "measure": {"atoms": [[0.5, 1.0]]},
    "alpha": 0.0,
    "lambda": 0.0,
    "nonlinearity": {"kind": "power", "a": 1.0, "p": 4.0},
    "solver": {
        "tol": 1e-8,
        "n_eigs": 16,
        "eigen_method": "schur",
        "n_dirs": 64,
        "n_samples": 64,
        "mp": {"max_iter": 2000, "path_points": 40},
        "link": {"seeds": 8},
    },
    "output_dir": "mixnl-out",
    "seed": 0,
}


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        where = f"{path}{key}"
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "measure":
            out[key] = _merge(out[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as a TOML literal, else kept as a string."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value", key=assignment)
    key, text = (part.strip() for part in assignment.split("=", 1))
    parts = key.split(".")
    if not all(parts):
        raise ConfigError(f"malformed key {key!r}", key=key)
    out = copy.deepcopy(cfg)
    node = out
    for part in parts[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"{part!r} is not a table", key=key)
        node = nxt
    if parts[0] == "measure" and len(parts) == 2:
        # atoms and density are alternatives; setting one drops the other
        node.pop("density" if parts[1] == "atoms" else "atoms", None)
    node[parts[-1]] = _parse_value(text)
    return out


def load_config(path=None, overrides=(), base: dict | None = None) -> RunConfig:
    """Defaults, then the file (TOML, or JSON by suffix), then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS if base is None else base)
    if path is not None:
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", key="config") from exc
        try:
            data = json.loads(raw) if path.suffix == ".json" else tomli.loads(raw.decode())
        except (tomli.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}", key="config") from exc
        if "measure" in data:
            cfg.pop("measure", None)
        cfg = _merge(cfg, data)
    for item in overrides:
        cfg = apply_override(cfg, item)
    return RunConfig.from_dict(cfg)


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}", key=key)


def _number(cfg, key, *, integer=False):
    node = cfg
    for part in key.split("."):
        _require(isinstance(node, dict) and part in node, key, "missing")
        node = node[part]
    ok = isinstance(node, (int, float)) and not isinstance(node, bool)
    if integer:
        ok = ok and float(node).is_integer()
    _require(ok and math.isfinite(float(node)), key, f"expected a finite {'integer' if integer else 'number'}, got {node!r}")
    return int(node) if integer else float(node)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration. ``raw`` is the merged dict echoed into reports."""

    raw: dict
    measure: SpectralMeasure
    quad: QuadratureOptions

    @classmethod
    def from_dict(cls, cfg: dict) -> RunConfig:
        unknown = sorted(set(cfg) - set(DEFAULTS))
        _require(not unknown, unknown[0] if unknown else "", "unknown key")

        omega = cfg["mesh"].get("omega")
        _require(isinstance(omega, list) and len(omega) == 2, "mesh.omega", "expected [x_l, x_r]")
        _require(all(isinstance(v, (int, float)) for v in omega) and omega[0] < omega[1], "mesh.omega",
                 "need numbers with x_l < x_r")
        R = _number(cfg, "mesh.collar_R")
        n_in = _number(cfg, "mesh.n_in", integer=True)
        n_ext = _number(cfg, "mesh.n_ext", integer=True)
        _require(n_in >= 2, "mesh.n_in", "must be >= 2")
        _require(n_ext >= 1, "mesh.n_ext", "must be >= 1")
        grading = cfg["mesh"].get("grading", "auto")
        _require(grading == "auto" or (isinstance(grading, (int, float)) and grading >= 1.0), "mesh.grading",
                 "expected 'auto' or a ratio >= 1")
        try:
            build_mesh(tuple(omega), R, n_in, n_ext, grading)
        except MixnlError as exc:
            raise ConfigError(f"mesh: {exc}", key="mesh") from exc
        q = cfg["mesh"].get("quad", {})
        try:
            quad = QuadratureOptions(near_singular_subdivisions=int(q.get("subdiv", 6)),
                                     far_field_order=int(q.get("order", 4)), tol=float(q.get("tol", 1e-10)))
        except (MixnlError, TypeError, ValueError) as exc:
            raise ConfigError(f"mesh.quad: {exc}", key="mesh.quad") from exc

        measure = _measure_from(cfg.get("measure", {}))
        alpha = _number(cfg, "alpha")
        _require(alpha >= 0, "alpha", "must be >= 0")
        _require(alpha > 0 or not measure.is_zero, "alpha", "alpha = 0 needs a nonzero measure")
        _number(cfg, "lambda")
        try:
            nonlinearity_from_spec(cfg["nonlinearity"])
        except (MixnlError, TypeError, ValueError) as exc:
            raise ConfigError(f"nonlinearity: {exc}", key="nonlinearity") from exc
        _require(_number(cfg, "solver.tol") > 0, "solver.tol", "must be > 0")
        _require(_number(cfg, "solver.n_eigs", integer=True) >= 2, "solver.n_eigs", "must be >= 2")
        _require(cfg["solver"].get("eigen_method") in ("schur", "regularized"), "solver.eigen_method",
                 "expected 'schur' or 'regularized'")
        for key in ("solver.n_dirs", "solver.n_samples", "solver.mp.max_iter", "solver.mp.path_points",
                    "solver.link.seeds"):
            _require(_number(cfg, key, integer=True) >= 1, key, "must be >= 1")
        _require(_number(cfg, "solver.mp.path_points", integer=True) >= 3, "solver.mp.path_points", "must be >= 3")
        _require(isinstance(cfg.get("output_dir"), str), "output_dir", "expected a string")
        _number(cfg, "seed", integer=True)
        return cls(raw=copy.deepcopy(cfg), measure=measure, quad=quad)

    def get(self, dotted: str):
        node = self.raw
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def nonlinearity(self):
        return nonlinearity_from_spec(self.raw["nonlinearity"])

    def mesh(self):
        m = self.raw["mesh"]
        return build_mesh(tuple(m["omega"]), m["collar_R"], int(m["n_in"]), int(m["n_ext"]), m.get("grading", "auto"))


def _measure_from(spec: dict) -> SpectralMeasure:
    _require(isinstance(spec, dict), "measure", "expected a table")
    has_atoms, has_density = "atoms" in spec, "density" in spec
    _require(has_atoms != has_density, "measure", "give exactly one of 'atoms' or 'density'")
    try:
        if has_atoms:
            atoms = spec["atoms"]
            _require(isinstance(atoms, list) and all(isinstance(a, list) and len(a) == 2 for a in atoms),
                     "measure.atoms", "expected [[s, c], ...]")
            return from_atoms([(float(s), float(c)) for s, c in atoms])
        dens = spec["density"]
        _require(isinstance(dens, dict) and "kind" in dens, "measure.density", "expected {kind, params, nodes}")
        fn = density_from_spec(dens["kind"], dens.get("params", {}))
        return from_density(fn, int(dens.get("nodes", 8)))
    except ConfigError:
        raise
    except (MixnlError, TypeError, ValueError) as exc:
        raise ConfigError(f"measure: {exc}", key="measure") from exc


# ----------------------------------------------------------------- presets


def _cor1(p):
    alpha, beta, s = float(p.get("alpha", 1.0)), float(p.get("beta", 1.0)), float(p.get("s", 0.5))
    return {"alpha": alpha, "measure": {"atoms": [[s, beta]]}}


def _cor2(p):
    orders = [float(s) for s in p.get("s", [0.25, 0.5, 0.75])]
    return {"alpha": float(p.get("alpha", 0.0)), "measure": {"atoms": [[s, 1.0] for s in orders]}}


def _cor3(p):
    K = int(p.get("K", 10))
    if "c" in p or "s" in p:
        c, s = list(map(float, p.get("c", []))), list(map(float, p.get("s", [])))
        _require(len(c) == len(s) and c, "params", "c and s must be nonempty lists of equal length")
    else:
        c = [2.0 ** -k for k in range(1, K + 1)]
        s = [1.0 - 2.0 ** -k for k in range(1, K + 1)]
    return {"alpha": float(p.get("alpha", 0.0)), "measure": {"atoms": [[sk, ck] for sk, ck in zip(s, c)]}}


def _cor4(p):
    kind = p.get("kind", "constant")
    params = p.get("params", {"value": 1.0} if kind == "constant" else {})
    return {"alpha": float(p.get("alpha", 0.0)),
            "measure": {"density": {"kind": kind, "params": params, "nodes": int(p.get("nodes", 8))}}}


PRESETS = {"cor1": _cor1, "cor2": _cor2, "cor3": _cor3, "cor4": _cor4}


def preset(name: str, params: dict | None = None, base: dict | None = None) -> RunConfig:
    """Configuration for one of the named operator families (``cor1`` to ``cor4``).

    ``cor1``: ``alpha`` times the Laplacian plus ``beta`` times one fractional order ``s``.
    ``cor2``: unit-weight sum over the orders ``s``.
    ``cor3``: weighted sum, by default ``c_k = 2^-k`` at ``s_k = 1 - 2^-k`` for ``k <= K``.
    ``cor4``: continuous density over the order, reduced by Gauss-Legendre with ``nodes`` points.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", key="preset")
    try:
        extra = PRESETS[name](dict(params or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"preset {name}: {exc}", key="params") from exc
    cfg = copy.deepcopy(DEFAULTS if base is None else base)
    cfg.pop("measure", None)
    return RunConfig.from_dict(_merge(cfg, extra))


def jsonable(obj):
    """Plain-Python copy of nested results for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj

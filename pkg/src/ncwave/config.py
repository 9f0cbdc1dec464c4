"""Experiment configuration: TOML files with [grid], [operator], [kernel], [run] blocks.

A user file is merged over the shipped default of the chosen subcommand,
then validated field by field.  Errors carry the dotted field name.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .kernels import BumpProfile, PlateauCutoff
from .lattice import SpacetimeGrid, make_grid

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SUBCOMMANDS",
    "SCHEMA",
    "load_config",
    "default_config",
    "parse_config",
    "schema_document",
]

SUBCOMMANDS = (
    "green-check",
    "born",
    "pole-scan",
    "cauchy-nonexistence",
    "cauchy-nonuniqueness",
    "scatter",
    "derivative-check",
    "bogoliubov",
    "moyal-converge",
)


class ConfigError(ValueError):
    def __init__(self, field: str | None, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "config", "field": self.field, "message": self.message}


# field -> (kind, description).  kinds: int, float, str:<a|b>, floats:<n>, floats, ints, bump, interval, cones
SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "grid": {
        "n_time": ("int", "number of time levels (>= 3)"),
        "n_space": ("int", "number of space points (>= 3)"),
        "dt": ("float", "time step; dt/dx <= 1"),
        "dx": ("float", "space step"),
        "t0": ("float", "first time level"),
        "x0": ("float", "first space point"),
    },
    "operator": {
        "variant": ("str:wave|dirac", "Klein-Gordon type wave operator or 1+1 Dirac operator"),
        "mass": ("float", "mass m >= 0"),
    },
    "kernel": {
        "variant": ("str:rank-one|rank-two|symmetric|pointwise|moyal", "kernel family"),
        "w1": ("bump", "first rank-one factor"),
        "w2": ("bump", "second rank-one factor"),
        "w3": ("bump", "rank-two: first factor of the second pair"),
        "w4": ("bump", "rank-two: second factor of the second pair"),
        "normalize": ("bool", "rescale so the largest |eigenvalue| of M+ is 1"),
        "a": ("bump", "Moyal symbol"),
        "a1": ("bump", "first commutator symbol"),
        "a2": ("bump", "second commutator symbol"),
        "theta0": ("float", "noncommutativity parameter"),
        "theta0_limit": ("float", "small theta0 used for the pointwise-limit check"),
        "cutoff_center": ("floats:2", "cutoff centre (t, x)"),
        "cutoff_half_widths": ("floats", "plateau half-widths, one per cutoff level"),
        "cutoff_band": ("float", "width of the cutoff transition band"),
        "commutator_half_width": ("float", "plateau half-width for the commutator comparison"),
    },
    "run": {
        "seed": ("int", "random seed"),
        "n_sources": ("int", "random sources per check"),
        "n_pairs": ("int", "random pairs for the adjoint check"),
        "n_basis": ("int", "size of the solution basis"),
        "source_t": ("interval", "time range of random source centres"),
        "source_x": ("interval", "space range of random source centres"),
        "source_radius": ("interval", "range of random source radii"),
        "lambda_fraction": ("float", "|lambda| * rho for the series checks"),
        "lambda_fractions": ("floats", "sweep of |lambda| * rho values"),
        "exact_fractions": ("floats", "lambda * rho values for the finite-rank exact route"),
        "lambdas": ("floats", "explicit lambda values"),
        "M": ("int", "Born series truncation order"),
        "tau_minus": ("float", "lower Cauchy time"),
        "tau_plus": ("float", "upper Cauchy time"),
        "t_sigma": ("float", "time of the Cauchy slice"),
        "lam": ("float", "coupling for the probe"),
        "levels": ("ints", "refinement levels (grid spacing / 2**level)"),
        "data_center": ("float", "centre of the Cauchy datum bump"),
        "data_radius": ("float", "radius of the Cauchy datum bump"),
        "cones": ("cones", "base intervals of the two double cones"),
        "scan_min": ("float", "pole scan: lower end in units of |lambda*|"),
        "scan_max": ("float", "pole scan: upper end in units of |lambda*|"),
        "scan_points": ("int", "pole scan: number of real grid points"),
        "scan_imag": ("float", "pole scan: half-height of the complex grid in units of |lambda*|"),
        "scan_imag_points": ("int", "pole scan: complex grid rows (0 for real only)"),
        "slab": ("interval", "time slab for norm estimates"),
        "centre_range": ("interval", "basis: range of datum bump centres"),
        "radius_range": ("interval", "basis: range of datum bump radii"),
        "basis_t_sigma": ("float", "basis: slice carrying the random data"),
    },
}

BUMP_KEYS = {"center", "radii", "weight", "amplitude", "components"}


def schema_document() -> dict:
    """JSON-friendly description of the config schema."""
    return {
        sec: {k: {"type": kind, "description": desc} for k, (kind, desc) in fields.items()}
        for sec, fields in SCHEMA.items()
    } | {
        "bump": {
            "center": "[t, x]",
            "radii": "[rt, rx], positive",
            "weight": "spacetime integral (unit-normalised bump); exclusive with amplitude",
            "amplitude": "peak amplitude; exclusive with weight",
            "components": "optional per-component factors for spinor fields",
        },
        "report": {
            "experiment": "subcommand name",
            "config_hash": "sha256 of the effective config (canonical JSON)",
            "assertions": "[{name, measured, tolerance, relation, pass}]",
        },
    }


def _num_list(field, v, n=None, kind=float):
    if not isinstance(v, list) or (n is not None and len(v) != n):
        raise ConfigError(field, f"expected a list of {n or 'some'} numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(field, "list entries must be numbers")
        if kind is int and not isinstance(x, int):
            raise ConfigError(field, "list entries must be integers")
        out.append(kind(x))
    return out


def _check_bump(field, v):
    if not isinstance(v, dict):
        raise ConfigError(field, "expected a table {center, radii, weight}")
    extra = set(v) - BUMP_KEYS
    if extra:
        raise ConfigError(f"{field}.{sorted(extra)[0]}", "unknown bump field")
    for k in ("center", "radii"):
        if k not in v:
            raise ConfigError(f"{field}.{k}", "missing")
    c = _num_list(f"{field}.center", v["center"], 2)
    r = _num_list(f"{field}.radii", v["radii"], 2)
    if min(r) <= 0:
        raise ConfigError(f"{field}.radii", "radii must be positive")
    if "weight" in v and "amplitude" in v:
        raise ConfigError(f"{field}.amplitude", "give weight or amplitude, not both")
    out = {"center": c, "radii": r}
    for k in ("weight", "amplitude"):
        if k in v:
            x = v[k]
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ConfigError(f"{field}.{k}", "expected a number")
            out[k] = float(x)
    if "components" in v:
        out["components"] = _num_list(f"{field}.components", v["components"])
    return out


def _check_value(field, kind, v):
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(field, "expected an integer")
        return v
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(field, "expected a number")
        if not np.isfinite(v):
            raise ConfigError(field, "must be finite")
        return float(v)
    if kind == "bool":
        if not isinstance(v, bool):
            raise ConfigError(field, "expected true or false")
        return v
    if kind.startswith("str:"):
        allowed = kind[4:].split("|")
        if v not in allowed:
            raise ConfigError(field, f"expected one of {allowed}")
        return v
    if kind.startswith("floats"):
        n = int(kind.split(":")[1]) if ":" in kind else None
        return _num_list(field, v, n)
    if kind == "ints":
        return _num_list(field, v, kind=int)
    if kind == "interval":
        a, b = _num_list(field, v, 2)
        if not a <= b:
            raise ConfigError(field, "interval must be ordered")
        return [a, b]
    if kind == "cones":
        if not isinstance(v, list) or len(v) != 2:
            raise ConfigError(field, "expected two intervals")
        return [_check_value(f"{field}[{i}]", "interval", c) for i, c in enumerate(v)]
    if kind == "bump":
        return _check_bump(field, v)
    raise AssertionError(kind)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k in SCHEMA:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    data: dict

    def get(self, section: str, key: str, default=...):
        sec = self.data.get(section, {})
        if key in sec:
            return sec[key]
        if default is ...:
            raise ConfigError(f"{section}.{key}", "missing")
        return default

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed", 0))

    def grid(self, components: int | None = None) -> SpacetimeGrid:
        g = self.data["grid"]
        N = components or (2 if self.get("operator", "variant", "wave") == "dirac" else 1)
        try:
            return make_grid(g["n_time"], g["n_space"], g["dt"], g["dx"], g.get("t0", 0.0), g.get("x0", 0.0), N)
        except ValueError as e:
            field = "grid.dt" if "CFL" in str(e) else "grid"
            raise ConfigError(field, str(e)) from None

    def bump(self, key: str, section: str = "kernel") -> BumpProfile:
        v = self.get(section, key)
        if "amplitude" in v:
            bp = BumpProfile(tuple(v["center"]), tuple(v["radii"]), v["amplitude"])
        else:
            bp = BumpProfile.unit(v["center"], v["radii"], v.get("weight", 1.0))
        if "components" in v:
            amp = complex(bp.amplitude)
            bp = BumpProfile(bp.center, bp.radii, tuple(amp * c for c in v["components"]))
        return bp

    def cutoffs(self) -> list[PlateauCutoff]:
        c = tuple(self.get("kernel", "cutoff_center", [0.0, 0.0]))
        b = self.get("kernel", "cutoff_band")
        return [PlateauCutoff(c, (L, L), (b, b)) for L in self.get("kernel", "cutoff_half_widths")]

    def config_hash(self) -> str:
        blob = json.dumps({"experiment": self.experiment, **self.data}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_inside(cfg: ExperimentConfig, field: str, t_range, x_range, margin: int = 2):
    g = cfg.grid()
    t_lo, t_hi = g.t[margin], g.t[-1 - margin]
    x_lo, x_hi = g.x[margin], g.x[-1 - margin]
    if t_range[0] < t_lo or t_range[1] > t_hi or x_range[0] < x_lo or x_range[1] > x_hi:
        raise ConfigError(field, "support not strictly inside the grid")


def _referential(cfg: ExperimentConfig):
    g = cfg.grid()
    for key in ("w1", "w2", "w3", "w4", "a", "a1", "a2"):
        if key in cfg.data.get("kernel", {}):
            _check_inside(cfg, f"kernel.{key}", *cfg.bump(key).box())
    k = cfg.data.get("kernel", {})
    if "cutoff_half_widths" in k:
        hw = k["cutoff_half_widths"]
        if not hw or any(b <= a for a, b in zip(hw, hw[1:])) or min(hw) <= 0:
            raise ConfigError("kernel.cutoff_half_widths", "need increasing positive half-widths")
        if k.get("cutoff_band", 0) <= 0:
            raise ConfigError("kernel.cutoff_band", "must be positive")
        for cut in cfg.cutoffs():
            _check_inside(cfg, "kernel.cutoff_half_widths", *cut.box())
    run = cfg.data.get("run", {})
    for key in ("tau_minus", "tau_plus", "t_sigma", "basis_t_sigma"):
        if key in run and not (g.t[2] <= run[key] <= g.t[-3]):
            raise ConfigError(f"run.{key}", "outside the grid time range")
    if "tau_minus" in run and "tau_plus" in run and run["tau_minus"] >= run["tau_plus"]:
        raise ConfigError("run.tau_plus", "need tau_minus < tau_plus")
    if "slab" in run:
        lo, hi = run["slab"]
        for key in ("w1", "w2", "w3", "w4"):
            if key in k:
                (a, b), _ = cfg.bump(key).box()
                if a < lo or b > hi:
                    raise ConfigError("run.slab", f"slab must contain the support of kernel.{key}")
    for key in ("n_sources", "n_pairs", "n_basis", "M", "scan_points"):
        if key in run and run[key] < 1:
            raise ConfigError(f"run.{key}", "must be positive")
    if "mass" in cfg.data.get("operator", {}) and cfg.data["operator"]["mass"] < 0:
        raise ConfigError("operator.mass", "must be non-negative")


def parse_config(experiment: str, raw: dict, base: dict | None = None) -> ExperimentConfig:
    if experiment not in SUBCOMMANDS:
        raise ConfigError(None, f"unknown experiment {experiment!r}")
    merged = _merge(base or {}, raw)
    clean: dict = {}
    for sec, body in merged.items():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(sec, "expected a table")
        clean[sec] = {}
        for key, v in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown field")
            clean[sec][key] = _check_value(f"{sec}.{key}", SCHEMA[sec][key][0], v)
    for key in SCHEMA["grid"]:
        if key not in clean.get("grid", {}) and key not in ("t0", "x0"):
            raise ConfigError(f"grid.{key}", "missing")
    for key in ("n_time", "n_space"):
        if clean["grid"][key] < 3:
            raise ConfigError(f"grid.{key}", "need at least 3 points")
    for key in ("dt", "dx"):
        if clean["grid"][key] <= 0:
            raise ConfigError(f"grid.{key}", "must be positive")
    cfg = ExperimentConfig(experiment, clean)
    cfg.grid()
    _referential(cfg)
    return cfg


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("--config", f"no such file: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("--config", f"TOML parse error: {e}") from None


def default_raw(experiment: str) -> dict:
    ref = resources.files("ncwave") / "configs" / f"{experiment}.toml"
    with resources.as_file(ref) as p:
        return _read_toml(p)


def default_config(experiment: str) -> ExperimentConfig:
    return parse_config(experiment, default_raw(experiment))


def load_config(experiment: str, path=None, seed: int | None = None) -> ExperimentConfig:
    """Shipped default for ``experiment`` overlaid with the file at ``path``."""
    if experiment not in SUBCOMMANDS:
        raise ConfigError(None, f"unknown experiment {experiment!r}")
    raw = _read_toml(Path(path)) if path is not None else {}
    if seed is not None:
        raw = _merge(raw, {"run": {"seed": int(seed)}})
    return parse_config(experiment, raw, default_raw(experiment))

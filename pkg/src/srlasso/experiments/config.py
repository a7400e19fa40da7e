"""Experiment configuration: JSON schema, defaults and validation.

A configuration file is a JSON object::

    {
      "experiment": "bound-tightness",
      "families": [                               # optional; see below
        {"facet": "m-gamma", "dims": [{"m": 50, "n": 200, "s": 7}],
         "gammas": [0.1, 0.5]}
      ],
      "dims": [{"m": 50, "n": 100, "s": 5}],      # shorthand for one family
      "gammas": [0.1],
      "grid": {"count": 51, "log_lo": -3, "log_hi": 2, "center": null},
      "lambdas": [0.1, 1.0],                      # explicit grid, overrides "grid"
      "seeds": [0, 1, 2],
      "solver": {"gap_tol": 1e-9, "max_iter": 200000, "step_ratio": 1.0},
      "output_dir": "out",
      "options": {...}                            # experiment specific
    }

Every ``(family, dims, gamma, seed)`` combination is one *cell*.  A grid
``center`` of ``null`` means the order-optimal parameter of each program.
The environment variable ``SRLL_SEED`` (a comma separated list of integers)
replaces the seed list.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import InvalidConfig
from ..solvers import SolverSettings

EXPERIMENTS = ("noise-robustness", "lipschitz-comparison", "gamma-m-facets",
               "uniqueness-curve", "uniqueness-heatmap", "bound-tightness")
PROFILES = ("paper", "ci")
SEED_ENV = "SRLL_SEED"

_SOLVER_KEYS = ("gap_tol", "max_iter", "step_ratio")


@dataclass(frozen=True)
class Dims:
    m: int
    n: int
    s: int


@dataclass(frozen=True)
class Family:
    facet: str
    dims: tuple
    gammas: tuple


@dataclass(frozen=True)
class GridSpec:
    count: int = 51
    log_lo: float = -3.0
    log_hi: float = 2.0
    center: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    families: tuple
    seeds: tuple
    grid: GridSpec = GridSpec()
    lambdas: Optional[tuple] = None
    solver: dict = field(default_factory=dict)
    output_dir: str = "."
    options: dict = field(default_factory=dict)

    def settings(self) -> SolverSettings:
        return SolverSettings(**{k: self.solver[k] for k in _SOLVER_KEYS if k in self.solver})

    def to_dict(self) -> dict:
        """Fully resolved configuration (all defaults filled in)."""
        s = self.settings()
        return {
            "experiment": self.experiment,
            "families": [{"facet": f.facet, "dims": [asdict(d) for d in f.dims],
                          "gammas": list(f.gammas)} for f in self.families],
            "grid": asdict(self.grid),
            "lambdas": None if self.lambdas is None else list(self.lambdas),
            "seeds": list(self.seeds),
            "solver": {k: getattr(s, k) for k in _SOLVER_KEYS},
            "output_dir": self.output_dir,
            "options": dict(sorted(self.options.items())),
        }


def _fail(msg):
    raise InvalidConfig(msg)


def _dims(obj) -> Dims:
    if not isinstance(obj, dict) or set(obj) != {"m", "n", "s"}:
        _fail(f"dims entries need exactly the keys m, n, s: {obj!r}")
    try:
        d = Dims(int(obj["m"]), int(obj["n"]), int(obj["s"]))
    except (TypeError, ValueError):
        _fail(f"dims entries must be integers: {obj!r}")
    if d.m < 1 or d.n < 1 or not 0 <= d.s <= d.n:
        _fail(f"invalid dimensions {obj!r}")
    return d


def _gammas(obj):
    if not isinstance(obj, list) or not obj:
        _fail("gammas must be a nonempty list")
    try:
        g = tuple(float(v) for v in obj)
    except (TypeError, ValueError):
        _fail("gammas must be numbers")
    if any(not np.isfinite(v) or v < 0 for v in g):
        _fail("gammas must be finite and nonnegative")
    return g


def _seeds(obj):
    if not isinstance(obj, list) or not obj:
        _fail("seed list must be a nonempty list of integers")
    try:
        seeds = tuple(int(v) for v in obj)
    except (TypeError, ValueError):
        _fail("seeds must be integers")
    if any(not 0 <= v < 2**64 for v in seeds):
        _fail("seeds must be 64-bit unsigned integers")
    return seeds


def env_seeds() -> Optional[tuple]:
    """Seeds from ``SRLL_SEED``, or None when the variable is unset."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return None
    try:
        return _seeds([int(v) for v in raw.replace(";", ",").split(",") if v.strip()])
    except ValueError:
        _fail(f"{SEED_ENV} must be a comma separated list of integers, got {raw!r}")


def config_from_dict(obj: dict, use_env: bool = True) -> ExperimentConfig:
    if not isinstance(obj, dict):
        _fail("configuration must be a JSON object")
    known = {"experiment", "families", "dims", "gammas", "grid", "lambdas", "seeds",
             "solver", "output_dir", "options"}
    unknown = set(obj) - known
    if unknown:
        _fail(f"unknown configuration keys: {sorted(unknown)}")
    name = obj.get("experiment")
    if name not in EXPERIMENTS:
        _fail(f"experiment must be one of {EXPERIMENTS}, got {name!r}")
    if "families" in obj:
        if "dims" in obj or "gammas" in obj:
            _fail("give either families or dims/gammas, not both")
        fams = obj["families"]
        if not isinstance(fams, list) or not fams:
            _fail("families must be a nonempty list")
        families = []
        for f in fams:
            if not isinstance(f, dict):
                _fail("each family must be an object")
            dl = f.get("dims")
            if not isinstance(dl, list) or not dl:
                _fail("each family needs a nonempty dims list")
            families.append(Family(str(f.get("facet", "default")),
                                   tuple(_dims(d) for d in dl), _gammas(f.get("gammas"))))
    else:
        dl = obj.get("dims")
        if not isinstance(dl, list) or not dl:
            _fail("dims must be a nonempty list")
        families = [Family("default", tuple(_dims(d) for d in dl), _gammas(obj.get("gammas")))]
    grid_obj = obj.get("grid") or {}
    if not isinstance(grid_obj, dict) or set(grid_obj) - {"count", "log_lo", "log_hi", "center"}:
        _fail("grid must be an object with keys count, log_lo, log_hi, center")
    try:
        grid = GridSpec(int(grid_obj.get("count", 51)), float(grid_obj.get("log_lo", -3.0)),
                        float(grid_obj.get("log_hi", 2.0)),
                        None if grid_obj.get("center") is None else float(grid_obj["center"]))
    except (TypeError, ValueError):
        _fail("grid values must be numbers")
    if grid.count < 3 or grid.count % 2 == 0:
        _fail("grid count must be an odd integer >= 3")
    if not grid.log_lo < grid.log_hi:
        _fail("grid log_lo must be below log_hi")
    if grid.center is not None and not grid.center > 0:
        _fail("grid center must be positive")
    lambdas = obj.get("lambdas")
    if lambdas is not None:
        if not isinstance(lambdas, list) or not lambdas:
            _fail("lambdas must be a nonempty list")
        try:
            lambdas = tuple(sorted(set(float(v) for v in lambdas)))
        except (TypeError, ValueError):
            _fail("lambdas must be numbers")
        if any(not (np.isfinite(v) and v > 0) for v in lambdas):
            _fail("lambdas must be positive")
    seeds = _seeds(obj.get("seeds"))
    if use_env:
        seeds = env_seeds() or seeds
    solver = obj.get("solver") or {}
    if not isinstance(solver, dict) or set(solver) - set(_SOLVER_KEYS):
        _fail(f"solver may only set {_SOLVER_KEYS}")
    try:
        SolverSettings(**solver)
    except (TypeError, ValueError) as exc:
        _fail(f"invalid solver settings: {exc}")
    options = obj.get("options") or {}
    if not isinstance(options, dict):
        _fail("options must be an object")
    cfg = ExperimentConfig(name, tuple(families), seeds, grid, lambdas, dict(solver),
                           str(obj.get("output_dir", ".")), dict(options))
    return replace(cfg, options={**default_options(name), **options})


def load_config(path, use_env: bool = True) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(obj, use_env)


def default_options(name: str) -> dict:
    if name == "bound-tightness":
        return {"local_offsets": [-1e-3, -3e-4, -1e-4, -3e-5, -1e-5,
                                  1e-5, 3e-5, 1e-4, 3e-4, 1e-3],
                "tolerance_factor": 1.05, "min_fraction": 0.95}
    if name == "uniqueness-curve":
        return {"full_zstar": True}
    if name == "uniqueness-heatmap":
        return {"full_zstar": False, "high_fraction": 0.9,
                "plotted_gammas": [0.01, 0.1, 1.0, 10.0]}
    return {}


def _logspace(lo, hi, num):
    return [float(v) for v in np.logspace(lo, hi, num)]


def default_config(name: str, profile: str = "paper", output_dir: str = ".",
                   use_env: bool = True) -> ExperimentConfig:
    """Built-in configuration of each experiment.

    The ``paper`` profile uses the published parameter sets with 501-point
    grids; the ``ci`` profile keeps the parameter sets but uses 51-point
    grids (and fewer seeds where that is the only cost driver).
    """
    if name not in EXPERIMENTS:
        raise InvalidConfig(f"unknown experiment {name!r}")
    if profile not in PROFILES:
        raise InvalidConfig(f"unknown profile {profile!r}")
    paper = profile == "paper"
    count = 501 if paper else 51
    m4 = [50, 100, 150, 200]
    if name == "noise-robustness":
        obj = {"dims": [{"m": 50, "n": 100, "s": 5}], "gammas": _logspace(-2, 1, 13),
               "seeds": [0, 1, 2, 3, 4], "grid": {"count": count}}
    elif name == "lipschitz-comparison":
        # the support comparison needs a fine grid, and the run is cheap
        obj = {"dims": [{"m": 100, "n": 200, "s": 5}], "gammas": [0.5],
               "seeds": [0, 1, 2, 3, 4], "grid": {"count": 501}}
    elif name == "gamma-m-facets":
        obj = {"families": [{"facet": "gamma-m",
                             "dims": [{"m": m, "n": 200, "s": 7} for m in m4],
                             "gammas": [0.1, 0.5, 1.0, 5.0, 10.0]}],
               "seeds": [0, 1, 2, 3, 4], "grid": {"count": count}}
    elif name == "uniqueness-curve":
        obj = {"dims": [{"m": 100, "n": 200, "s": 2}], "gammas": [0.1], "seeds": [0],
               "grid": {"count": 31, "log_lo": -1.0, "log_hi": 1.0, "center": 1.0}}
    elif name == "uniqueness-heatmap":
        obj = {"dims": [{"m": 100, "n": 200, "s": 2}], "gammas": _logspace(-2, 1, 7),
               "seeds": list(range(20 if paper else 5)),
               "grid": {"count": 31, "log_lo": -1.0, "log_hi": 1.0, "center": 1.0}}
    else:  # bound-tightness
        obj = {"families": [
            {"facet": "m-s", "dims": [{"m": m, "n": 200, "s": s} for m in m4 for s in (3, 7, 15)],
             "gammas": [0.1]},
            {"facet": "m-gamma", "dims": [{"m": m, "n": 200, "s": 7} for m in m4],
             "gammas": [0.1, 0.5, 1.0, 5.0]}],
            "seeds": [0, 1, 2], "grid": {"count": count}}
    obj.update(experiment=name, output_dir=output_dir)
    return config_from_dict(obj, use_env)

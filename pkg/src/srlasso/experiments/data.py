"""Synthetic compressed-sensing instances, parameter grids and best-parameter search.

The data model draws a sparse ground truth and Gaussian measurements::

    x_sharp[j] = m + W_j sqrt(m)   for j < s,   0 otherwise
    A[i, j]    ~ N(0, 1/m)
    b          = A x_sharp + gamma w

with ``W`` and ``w`` standard normal.  Each of the three draws uses its own
substream of :mod:`srlasso.experiments.rng`, so changing ``gamma`` leaves
``A`` and ``x_sharp`` untouched.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import SrLassoError
from ..solvers import (PrimalDualPair, ProblemInstance, SolverSettings,
                       solve_lasso, solve_srlasso)
from . import rng

log = logging.getLogger(__name__)

PROGRAMS = ("SR", "UC")


@dataclass(frozen=True)
class DataModel:
    m: int
    n: int
    s: int
    gamma: float
    seed: int

    def __post_init__(self):
        for name in ("m", "n"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0 <= int(self.s) <= int(self.n):
            raise ValueError(f"sparsity s={self.s} must lie in [0, n={self.n}]")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be a finite nonnegative number")
        rng._check_seed(self.seed)


@dataclass(frozen=True)
class Instance:
    """One draw of the data model."""

    model: DataModel
    A: np.ndarray
    b: np.ndarray
    x_sharp: np.ndarray

    def problem(self, lam: float) -> ProblemInstance:
        return ProblemInstance(self.A, self.b, lam)


def generate_instance(d: DataModel) -> Instance:
    """Draw ``(A, b, x_sharp)`` for the model ``d`` (deterministic in ``d.seed``)."""
    m, n, s = int(d.m), int(d.n), int(d.s)
    W = rng.normals(d.seed, rng.SIGNAL, s)
    x = np.zeros(n)
    x[:s] = m + W * math.sqrt(m)
    A = rng.normals(d.seed, rng.MATRIX, m * n).reshape(m, n) / math.sqrt(m)
    w = rng.normals(d.seed, rng.NOISE, m)
    b = A @ x + d.gamma * w
    for arr in (A, b, x):
        arr.setflags(write=False)
    return Instance(d, A, b, x)


def lambda_star(program: str, n: int) -> float:
    """Order-optimal parameter: ``1.1 Phi^{-1}(1 - 0.05/(2n))`` for the
    square-root LASSO and ``sqrt(2 log n)`` for the LASSO."""
    if program == "SR":
        return 1.1 * rng.normal_quantile(1.0 - 0.05 / (2.0 * n))
    if program == "UC":
        return math.sqrt(2.0 * math.log(n))
    raise ValueError(f"unknown program {program!r}")


@dataclass(frozen=True)
class LambdaGrid:
    program: str
    center: float
    count: int
    log_lo: float
    log_hi: float
    values: tuple = field(repr=False)

    @property
    def center_index(self) -> int:
        return self.values.index(self.center)


def build_lambda_grid(program: str, n: int, count: int, log_lo: float = -3.0,
                      log_hi: float = 2.0, center: Optional[float] = None) -> LambdaGrid:
    """Logarithmic grid ``center * 10**t`` with ``t`` uniform on ``[log_lo, log_hi]``.

    ``center`` defaults to :func:`lambda_star`.  The exponent closest to zero
    is snapped to exactly 0, so the grid contains ``center`` itself whenever
    ``log_lo <= 0 <= log_hi`` (for symmetric ranges this is the middle point).
    """
    count = int(count)
    if count < 3 or count % 2 == 0:
        raise ValueError(f"grid size must be an odd integer >= 3, got {count}")
    if not log_lo < log_hi:
        raise ValueError("log_lo must be smaller than log_hi")
    c = float(lambda_star(program, n) if center is None else center)
    if not c > 0:
        raise ValueError("grid center must be positive")
    t = np.linspace(log_lo, log_hi, count)
    if log_lo <= 0.0 <= log_hi:
        t[int(np.argmin(np.abs(t)))] = 0.0
    values = tuple(float(v) for v in c * 10.0**t)
    return LambdaGrid(program, c, count, float(log_lo), float(log_hi), values)


def solver_for(program: str) -> Callable[..., PrimalDualPair]:
    if program == "SR":
        return solve_srlasso
    if program == "UC":
        return solve_lasso
    raise ValueError(f"unknown program {program!r}")


@dataclass
class PathPoint:
    lam: float
    pair: Optional[PrimalDualPair]
    status: str
    error: Optional[float] = None  # ||x(lam) - x_sharp||


def solve_path(inst: Instance, program: str, lambdas: Sequence[float],
               s: Optional[SolverSettings] = None) -> list[PathPoint]:
    """Solve at every ``lam`` (in increasing order of the returned list).

    The solves run from the largest parameter down, each warm-started at the
    previous solution; the warm start only affects speed, not the certified
    result.  A point whose solve does not reach the gap target keeps its best
    iterate with status ``"not-converged"``; a point whose solve raises gets
    status ``"error"`` and no pair.
    """
    solve = solver_for(program)
    s = s or SolverSettings()
    out = {}
    x0 = None
    for lam in sorted(set(float(v) for v in lambdas), reverse=True):
        try:
            pair = solve(inst.problem(lam), s, x0=x0)
        except (SrLassoError, np.linalg.LinAlgError) as exc:
            log.warning("%s solve failed at lam=%r: %s", program, lam, exc)
            out[lam] = PathPoint(lam, None, "error")
            continue
        x0 = pair.x
        status = "ok" if pair.converged else "not-converged"
        if status != "ok":
            log.warning("%s solve at lam=%r stopped with gap %.3e", program, lam, pair.gap)
        out[lam] = PathPoint(lam, pair, status,
                             float(np.linalg.norm(pair.x - inst.x_sharp)))
    return [out[k] for k in sorted(out)]


@dataclass
class BestLambda:
    lambda_best: float
    x_best: np.ndarray
    path: list
    excluded: list


def best_lambda(d, grid, s: Optional[SolverSettings] = None,
                program: Optional[str] = None) -> BestLambda:
    """Grid minimizer of ``||x(lam) - x_sharp||``, ties going to the smaller ``lam``.

    ``d`` is a :class:`DataModel` or an already generated :class:`Instance`;
    ``grid`` a :class:`LambdaGrid` or a plain sequence (then ``program`` is
    required).  Points whose solve failed or did not converge are excluded
    from the search and listed in ``excluded``.
    """
    inst = d if isinstance(d, Instance) else generate_instance(d)
    if isinstance(grid, LambdaGrid):
        program = program or grid.program
        lambdas = grid.values
    else:
        lambdas = tuple(grid)
    if not lambdas:
        raise ValueError("grid is empty")
    if program not in PROGRAMS:
        raise ValueError(f"unknown program {program!r}")
    path = solve_path(inst, program, lambdas, s)
    return pick_best(path)


def pick_best(path: Sequence[PathPoint]) -> BestLambda:
    """:func:`best_lambda` on an already solved path."""
    good = [pt for pt in path if pt.status == "ok"]
    excluded = [pt.lam for pt in path if pt.status != "ok"]
    if excluded:
        log.warning("excluded %d grid point(s) from the best-parameter search", len(excluded))
    if not good:
        raise SrLassoError("no grid point was solved to tolerance")
    best = good[0]
    for pt in good[1:]:  # ascending lam: strict improvement keeps the smaller lam on ties
        if pt.error < best.error:
            best = pt
    return BestLambda(best.lam, best.pair.x, list(path), excluded)

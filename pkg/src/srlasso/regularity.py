"""Support sets and the weak, intermediate and strong regularity conditions.

Given a solution ``x`` of the square-root LASSO with nonzero residual
``r = b - Ax`` and dual certificate ``y = r / ||r||``:

* the support is ``I = supp(x)`` and the equicorrelation set is
  ``J = {i : |A_i^T y| = lam}``;
* the *weak* condition asks that ``A_I`` has full column rank, ``b`` is not
  in ``rge A_I`` and the auxiliary value
  ``Z* = min { ||A_{I^C}^T (y + z)||_inf : A_I^T z = 0, y^T z = 0 }``
  is strictly below ``lam``; it certifies that ``x`` is the unique solution;
* the *intermediate* condition asks that ``A_J`` has full column rank and
  ``b`` is not in ``rge A_J``;
* the *strong* condition asks for the full-rank/range clause on ``I`` and
  strict dual slackness ``||A_{I^C}^T r||_inf < lam ||r||``.

Strong implies intermediate implies weak.  A flag equal to ``None`` means
indeterminate: it happens exactly when the residual vanishes, in which case
``y`` is undefined and ``Z*`` is reported as ``inf``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import Indeterminate, NotConverged
from .linalg import (ColumnSelection, columns, nullspace_projector, range_test,
                     svd_summary)
from .solvers import (PrimalDualPair, ProblemInstance, SolverSettings,
                      primal_dual_splitting, solve_srlasso)

#: Relative margin used for the strict inequalities of the weak and strong
#: conditions.
STRICTNESS_MARGIN = 1e-8
#: Duality-gap target of the auxiliary program.
AUX_GAP_TOL = 1e-10


@dataclass(frozen=True)
class SupportSets:
    support_I: ColumnSelection
    equicorrelation_J: ColumnSelection
    tol_support: float
    tol_equi: float
    residual_nonzero: bool

    def to_dict(self, one_based: bool = False) -> dict:
        pick = (lambda c: c.one_based()) if one_based else (lambda c: list(c.indices))
        return {"I": pick(self.support_I), "J": pick(self.equicorrelation_J),
                "tol_support": self.tol_support, "tol_equi": self.tol_equi,
                "residual_nonzero": self.residual_nonzero}


@dataclass
class RegularityReport:
    """Outcome of the regularity checks.

    Every check fills in its own fields and leaves the others at ``None``;
    :meth:`merge` combines partial reports.  Boolean flags equal to ``None``
    after merging are indeterminate.
    """

    weak: Optional[bool] = None
    intermediate: Optional[bool] = None
    strong: Optional[bool] = None
    weak_witness_z: Optional[np.ndarray] = None
    weak_optimum_Zstar: Optional[float] = None
    strong_margin: Optional[float] = None
    rank_AI_full: Optional[bool] = None
    rank_AJ_full: Optional[bool] = None
    b_in_range_AI: Optional[bool] = None
    b_in_range_AJ: Optional[bool] = None
    intermediate_vacuous: Optional[bool] = None
    Zstar_lower_bound: Optional[float] = field(default=None, repr=False)

    def merge(self, *others: "RegularityReport") -> "RegularityReport":
        out = RegularityReport(**{f.name: getattr(self, f.name) for f in fields(self)})
        for other in others:
            for f in fields(other):
                v = getattr(other, f.name)
                if v is not None:
                    setattr(out, f.name, v)
        return out

    @property
    def determinate(self) -> bool:
        return None not in (self.weak, self.intermediate, self.strong)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.weak_witness_z is not None:
            d["weak_witness_z"] = np.asarray(self.weak_witness_z).tolist()
        return d


def detect_sets(p: ProblemInstance, pair: PrimalDualPair, tol_support: float = 1e-6,
                tol_equi: Optional[float] = None) -> SupportSets:
    """Support ``I`` and equicorrelation set ``J`` of a solution.

    ``I = {i : |x_i| > tol_support * max(1, ||x||_inf)}`` and
    ``J = {i : |A_i^T y| >= lam - tol_equi}`` with ``tol_equi`` defaulting
    to ``1e-6 * lam``.  When the residual is numerically zero ``J`` is left
    empty and ``residual_nonzero`` is False.
    """
    n = p.A.shape[1]
    if tol_equi is None:
        tol_equi = 1e-6 * p.lam
    x = np.asarray(pair.x, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x)))) if n else 1.0
    I = ColumnSelection.from_mask(np.abs(x) > tol_support * scale)
    r = p.b - p.A @ x
    nr = float(np.linalg.norm(r))
    nonzero = nr > p.residual_floor
    if nonzero:
        corr = np.abs(p.A.T @ (r / nr))
        J = ColumnSelection.from_mask(corr >= p.lam - tol_equi)
    else:
        J = ColumnSelection((), n)
    return SupportSets(I, J, float(tol_support), float(tol_equi), bool(nonzero))


def project_l1_ball(v, radius=1.0):
    """Euclidean projection onto ``{u : ||u||_1 <= radius}`` by sorting."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    k = np.arange(1, a.size + 1)
    rho = np.nonzero(mu * k > cs - radius)[0][-1]
    theta = (cs[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


@dataclass
class AuxiliaryResult:
    Zstar: float
    z: np.ndarray
    lower_bound: float
    iterations: int
    converged: bool


def solve_auxiliary(p: ProblemInstance, sets: SupportSets, y,
                    s: Optional[SolverSettings] = None, target: Optional[float] = None,
                    return_info: bool = False, raise_on_fail: bool = False):
    """Minimize ``||A_{I^C}^T (y + z)||_inf`` over ``z`` orthogonal to the
    columns of ``A_I`` and to ``y``.

    The program is solved by the primal-dual splitting with the constraint
    handled through the orthogonal projector onto the feasible subspace.
    Its dual, ``max <A_{I^C}^T y, u>`` over ``||u||_1 <= 1`` with
    ``P A_{I^C} u = 0``, supplies a lower bound so that the returned value
    ``Zstar`` is within ``AUX_GAP_TOL`` of the optimum on convergence.

    If ``target`` is given the solve also stops as soon as the value is
    certified to be below ``target`` (upper bound) or at or above it (lower
    bound).

    Returns ``(Zstar, z)``, or an :class:`AuxiliaryResult` when
    ``return_info`` is set.
    """
    s = s or SolverSettings()
    A = p.A
    m, n = A.shape
    y = np.asarray(y, dtype=float).ravel()
    if abs(np.linalg.norm(y) - 1.0) > 1e-9:
        raise ValueError("y must have unit norm")
    Ic = sets.support_I.complement()
    if len(Ic) == 0:
        res = AuxiliaryResult(0.0, np.zeros(m), 0.0, 0, True)
        return res if return_info else (res.Zstar, res.z)
    C = columns(A, Ic)
    B = np.column_stack([columns(A, sets.support_I), y])
    P = nullspace_projector(B)
    c = C.T @ y
    Kop = C.T @ P  # maps z to A_{I^C}^T P z
    ub0 = float(np.max(np.abs(c)))

    # basis of ker(P C), used to project dual iterates onto dual feasibility
    U, sv, Vt = np.linalg.svd(Kop.T, full_matrices=True)
    tol = max(Kop.shape) * 1e-12 * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    N = Vt[rank:].T

    best = {"ub": ub0, "z": np.zeros(m), "lb": -np.inf}

    def lower_bound(u):
        if N.shape[1] == 0:
            return 0.0
        w = N @ (N.T @ u)
        l1 = np.abs(w).sum()
        if l1 > 1.0:
            w = w / l1
        return float(c @ w)

    def done():
        if target is not None and (best["ub"] < target or best["lb"] >= target):
            return True
        return best["ub"] - best["lb"] <= AUX_GAP_TOL * max(1.0, best["ub"])

    iters = 0
    if not done():
        normK = float(np.linalg.norm(Kop, 2))
        if normK == 0.0:
            best["lb"] = best["ub"]
        else:
            step = np.sqrt(0.95) / normK
            tau, sigma = step * s.step_ratio, step / s.step_ratio

            def monitor(k, z, u):
                ub = float(np.max(np.abs(c + Kop @ z)))
                if ub < best["ub"]:
                    best["ub"], best["z"] = ub, P @ z
                best["lb"] = max(best["lb"], lower_bound(u))
                return done()

            _, _, iters, _ = primal_dual_splitting(
                Kop, lambda v, t: v, lambda v, sg: project_l1_ball(v + sg * c),
                np.zeros(m), np.zeros(n - len(sets.support_I)), tau, sigma,
                s.max_iter, monitor, every=s.check_every)
    res = AuxiliaryResult(best["ub"], best["z"], best["lb"], iters, bool(done()))
    if not res.converged and raise_on_fail:
        raise NotConverged(f"auxiliary gap {res.Zstar - res.lower_bound:.3e}", res)
    return res if return_info else (res.Zstar, res.z)


def _rank_range(A, sel: ColumnSelection, b):
    if len(sel) == 0:
        return True, False
    M = columns(A, sel)
    full = svd_summary(M).numerical_rank == len(sel)
    return bool(full), bool(range_test(M, b))


def check_weak(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets,
               s: Optional[SolverSettings] = None,
               margin: float = STRICTNESS_MARGIN,
               full_solve: bool = False) -> RegularityReport:
    """Weak condition: rank/range clause on ``I`` and ``Z* < lam (1 - margin)``.

    With a zero residual the flag is indeterminate (``None``) and ``Z*`` is
    reported as ``inf``.  With ``full_solve=False`` the auxiliary program
    stops as soon as the comparison with ``lam`` is decided, so the recorded
    ``Z*`` is then only a certified upper bound.
    """
    full, in_rge = _rank_range(p.A, sets.support_I, p.b)
    part = RegularityReport(rank_AI_full=full, b_in_range_AI=in_rge)
    if not sets.residual_nonzero:
        return part.merge(RegularityReport(weak_optimum_Zstar=float("inf")))
    r = p.b - p.A @ pair.x
    y = r / np.linalg.norm(r)
    threshold = p.lam * (1.0 - margin)
    res = solve_auxiliary(p, sets, y, s, target=None if full_solve else threshold,
                          return_info=True)
    clause = len(sets.support_I) == 0 or (full and not in_rge)
    weak = bool(clause and res.Zstar < threshold)
    return part.merge(RegularityReport(
        weak=weak, weak_witness_z=res.z, weak_optimum_Zstar=res.Zstar,
        Zstar_lower_bound=res.lower_bound))


def check_intermediate(p: ProblemInstance, pair: PrimalDualPair,
                       sets: SupportSets) -> RegularityReport:
    """Intermediate condition: nonzero residual, ``A_J`` of full column rank
    and ``b`` outside ``rge A_J``.  Holds vacuously when ``J`` is empty."""
    J = sets.equicorrelation_J
    full, in_rge = _rank_range(p.A, J, p.b)
    ok = bool(sets.residual_nonzero and full and not in_rge)
    return RegularityReport(intermediate=ok, rank_AJ_full=full, b_in_range_AJ=in_rge,
                            intermediate_vacuous=bool(sets.residual_nonzero and len(J) == 0))


def check_strong(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets,
                 margin: float = STRICTNESS_MARGIN) -> RegularityReport:
    """Strong condition: rank/range clause on ``I`` and strict slackness
    ``lam ||r|| - ||A_{I^C}^T r||_inf > margin * lam ||r||``."""
    full, in_rge = _rank_range(p.A, sets.support_I, p.b)
    r = p.b - p.A @ pair.x
    nr = float(np.linalg.norm(r))
    Ic = sets.support_I.complement()
    slack = float(np.max(np.abs(columns(p.A, Ic).T @ r))) if len(Ic) else 0.0
    smargin = p.lam * nr - slack
    clause = len(sets.support_I) == 0 or (full and not in_rge)
    strong = bool(sets.residual_nonzero and clause and smargin > margin * p.lam * nr)
    return RegularityReport(strong=strong, strong_margin=smargin,
                            rank_AI_full=full, b_in_range_AI=in_rge)


def implication_audit(report: RegularityReport) -> bool:
    """True iff strong implies intermediate and intermediate implies weak."""
    if not report.determinate:
        raise Indeterminate("report has indeterminate flags")
    return bool((not report.strong or report.intermediate)
                and (not report.intermediate or report.weak))


def check_regularity(p: ProblemInstance, pair: Optional[PrimalDualPair] = None,
                     s: Optional[SolverSettings] = None, tol_support: float = 1e-6,
                     tol_equi: Optional[float] = None,
                     margin: float = STRICTNESS_MARGIN, full_solve: bool = False):
    """Solve (if needed), detect the sets and run all three checks.

    Returns ``(pair, sets, report)``.
    """
    if pair is None:
        pair = solve_srlasso(p, s)
    sets = detect_sets(p, pair, tol_support, tol_equi)
    report = check_weak(p, pair, sets, s, margin, full_solve).merge(
        check_intermediate(p, pair, sets), check_strong(p, pair, sets, margin))
    return pair, sets, report

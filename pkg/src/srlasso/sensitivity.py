"""Closed-form solutions and first-order sensitivity of the solution map.

Let ``S(b, lam)`` be the square-root LASSO solution map and ``x = S(b, lam)``
a solution with residual ``r = b - Ax != 0``, certificate ``y = r / ||r||``
and projector ``P = I - y y^T``.

* Under the intermediate condition the solution is
  ``x_J = B A_J^T P b`` with ``B = (A_J^T P A_J)^{-1}``, and ``S`` has a
  directional derivative along ``(q, alpha)`` given by
  ``w_K = B_K (A_K^T P q - (alpha / lam) A_K^T r)`` for an active set
  ``I <= K <= J`` that depends on the direction.
* Under the strong condition ``K = I`` for every direction and the
  derivative is linear, giving the Jacobians with respect to ``b`` and
  ``lam`` and the Lipschitz bound
  ``(1 / lam) ||A_I^+ r|| / |1 - V|`` with ``V = y^T A_I A_I^+ y``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (Degenerate, IntermediateFails, StrongFails, ZeroResidual)
from .linalg import (ColumnSelection, columns, embed, pseudoinverse,
                     smw_inverse, svd_summary)
from .regularity import SupportSets, check_intermediate, check_strong
from .solvers import (PrimalDualPair, ProblemInstance, SolverSettings,
                      solve_srlasso)

#: Solver settings used by the finite-difference validators.
FD_SETTINGS = SolverSettings(gap_tol=1e-12)


@dataclass
class SensitivityReport:
    K_set: Optional[ColumnSelection] = None
    directional_derivative: Optional[np.ndarray] = None
    jacobian_b: Optional[np.ndarray] = None
    jacobian_lambda: Optional[np.ndarray] = None
    L_SR_bound_J: Optional[float] = None
    L_SR_bound_I: Optional[float] = None
    L_SR_lambda_bound: Optional[float] = None
    L_UC_lambda_bound: Optional[float] = None
    V: Optional[float] = None
    L_UC_same_data: Optional[float] = None
    tighter_bound: Optional[str] = None
    validation: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, ColumnSelection):
                v = list(v.indices)
            elif isinstance(v, np.ndarray):
                v = v.tolist()
            out[k] = v
        return out


def _residual_and_dual(p: ProblemInstance, x):
    r = p.b - p.A @ np.asarray(x, dtype=float)
    nr = float(np.linalg.norm(r))
    if nr <= p.residual_floor:
        raise ZeroResidual(f"residual norm {nr:.3e} is below the floor")
    return r, r / nr


def _project_out(y, M):
    """``(I - y y^T) M`` without forming the projector."""
    return M - np.outer(y, y @ M)


def analytic_solution(p: ProblemInstance, y, J: ColumnSelection) -> np.ndarray:
    """Closed-form solution ``x_J = B A_J^T (I - y y^T) b``, zero off ``J``.

    ``B`` is the rank-one-updated inverse of ``A_J^T (I - y y^T) A_J``;
    :class:`~srlasso.errors.RankDeficient` and :class:`~srlasso.errors.InRange`
    propagate from it.
    """
    n = p.A.shape[1]
    y = np.asarray(y, dtype=float).ravel()
    if len(J) == 0:
        return np.zeros(n)
    AJ = columns(p.A, J)
    B = smw_inverse(AJ, y)
    xJ = B @ (AJ.T @ (p.b - y * (y @ p.b)))
    return embed(xJ, J, n)


def _restricted_derivative(p, y, r, K, q, alpha):
    AK = columns(p.A, K)
    if len(K) == 0:
        return np.zeros(0)
    B = smw_inverse(AK, y)
    rhs = AK.T @ (q - y * (y @ q)) - (alpha / p.lam) * (AK.T @ r)
    return B @ rhs


def directional_derivative(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets,
                           q, alpha: float, tol: float = 1e-9):
    """Directional derivative of the solution map along ``(q, alpha)``.

    The active set ``K`` is found by starting from ``I`` and updating with
    the complementarity tests on ``J \\ I``: an index ``i`` outside ``K``
    must not have its correlation pushed above ``lam``, and an index in
    ``K \\ I`` must move with the sign of its correlation.  Indices that
    violate a test are added or removed for at most ``|J \\ I| + 1`` passes;
    if that does not settle, every subset of ``J \\ I`` is tried (up to 12
    indices).

    Returns ``(w, K)``.
    """
    inter = check_intermediate(p, pair, sets)
    if not inter.intermediate:
        raise IntermediateFails("intermediate condition does not hold")
    n = p.A.shape[1]
    q = np.asarray(q, dtype=float).ravel()
    r, y = _residual_and_dual(p, pair.x)
    I, J = sets.support_I, sets.equicorrelation_J
    if not I.issubset(J):
        raise IntermediateFails("support is not contained in the equicorrelation set")
    extra = [j for j in J if j not in I]
    sgn = np.sign(p.A.T @ y)

    def evaluate(K):
        wK = _restricted_derivative(p, y, r, K, q, alpha)
        w = embed(wK, K, n)
        d = q - p.A @ w
        g = p.A.T @ (d - y * (y @ d)) - (alpha / p.lam) * (p.A.T @ r)
        scale = max(1.0, float(np.max(np.abs(g[list(J)]))) if len(J) else 1.0,
                    float(np.max(np.abs(w))) if n else 1.0)
        add = [i for i in extra if i not in K and sgn[i] * g[i] > tol * scale]
        drop = [i for i in extra if i in K and sgn[i] * w[i] < -tol * scale]
        return w, add, drop

    K = ColumnSelection(I.indices, n)
    seen = set()
    for _ in range(len(extra) + 1):
        if K.indices in seen:
            break
        seen.add(K.indices)
        w, add, drop = evaluate(K)
        if not add and not drop:
            return w, K
        K = ColumnSelection.of((set(K.indices) | set(add)) - set(drop), n)
    if len(extra) <= 12:
        for k in range(len(extra) + 1):
            for extra_K in itertools.combinations(extra, k):
                Kc = ColumnSelection.of(tuple(I.indices) + extra_K, n)
                if Kc.indices in seen:
                    continue
                w, add, drop = evaluate(Kc)
                if not add and not drop:
                    return w, Kc
    raise Degenerate(f"no active set between I and J validates for this direction "
                     f"(|J \\ I| = {len(extra)})")


def _require_strong(p, pair, sets):
    rep = check_strong(p, pair, sets)
    if not rep.strong:
        raise StrongFails(f"strong condition fails (margin {rep.strong_margin!r})")


def jacobian_strong(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets):
    """Jacobians ``dx/db`` (n x m) and ``dx/dlam`` (n,) under the strong condition."""
    _require_strong(p, pair, sets)
    m, n = p.A.shape[0], p.A.shape[1]
    I = sets.support_I
    if len(I) == 0:
        return np.zeros((n, m)), np.zeros(n)
    r, y = _residual_and_dual(p, pair.x)
    AI = columns(p.A, I)
    B = smw_inverse(AI, y)
    jb = np.zeros((n, m))
    jb[I.array] = B @ _project_out(y, AI).T
    jl = embed(-(B @ (AI.T @ r)) / p.lam, I, n)
    return jb, jl


def lambda_derivative_closed_form(p: ProblemInstance, pair: PrimalDualPair,
                                  sets: SupportSets) -> np.ndarray:
    """``dx/dlam = -(1/lam) A_I^+ r / (1 - V)`` on ``I``, zero elsewhere."""
    n = p.A.shape[1]
    I = sets.support_I
    if len(I) == 0:
        return np.zeros(n)
    r, y = _residual_and_dual(p, pair.x)
    AIp = pseudoinverse(columns(p.A, I))
    V = _V(p.A, I, y)
    return embed(-(AIp @ r) / (p.lam * (1.0 - V)), I, n)


def _V(A, I, y):
    if len(I) == 0:
        return 0.0
    AI = columns(A, I)
    proj = AI @ (pseudoinverse(AI) @ y)
    return float(y @ proj)


def _bound(A, sel, y, r, lam):
    """``[1/smin^2 + 1/(1 - ||A_S A_S^+ y||)] [smax + ||A_S^T r|| / lam]``."""
    M = columns(A, sel)
    info = svd_summary(M)
    proj = np.linalg.norm(M @ (pseudoinverse(M) @ y))
    return float((1.0 / info.sigma_min_nonzero**2 + 1.0 / (1.0 - proj))
                 * (info.sigma_max + np.linalg.norm(M.T @ r) / lam))


def lipschitz_bounds(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets,
                     lasso_pair: Optional[PrimalDualPair] = None,
                     lasso_lam: Optional[float] = None,
                     tol_support: float = 1e-6) -> SensitivityReport:
    """Lipschitz bounds of the solution map at ``pair``.

    Fields whose precondition fails are left as ``None``: the ``J`` bound
    needs the intermediate condition, the ``I`` bounds the strong one, and
    the LASSO bound a LASSO solution ``lasso_pair`` at parameter
    ``lasso_lam``.  ``L_UC_same_data`` is ``(1/lam) ||A_I^+ r||`` computed
    from the square-root LASSO's own ``(I, r)``.
    """
    rep = SensitivityReport()
    I, J = sets.support_I, sets.equicorrelation_J
    A = p.A
    if sets.residual_nonzero:
        r, y = _residual_and_dual(p, pair.x)
        if check_intermediate(p, pair, sets).intermediate and len(J):
            rep.L_SR_bound_J = _bound(A, J, y, r, p.lam)
        strong = check_strong(p, pair, sets).strong
        V = _V(A, I, y)
        rep.V = V
        if strong:
            if len(I):
                rep.L_SR_bound_I = _bound(A, I, y, r, p.lam)
                base = float(np.linalg.norm(pseudoinverse(columns(A, I)) @ r)) / p.lam
            else:
                rep.L_SR_bound_I = 0.0
                base = 0.0
            rep.L_UC_same_data = base
            rep.L_SR_lambda_bound = base / abs(1.0 - V)
        if rep.L_SR_bound_I is not None and rep.L_SR_bound_J is not None:
            rep.tighter_bound = "I" if rep.L_SR_bound_I <= rep.L_SR_bound_J else "J"
    if lasso_pair is not None:
        lam_uc = float(lasso_lam if lasso_lam is not None else p.lam)
        rep.L_UC_lambda_bound = lasso_lipschitz_bound(A, p.b, lam_uc, lasso_pair.x, tol_support)
    return rep


def lasso_lipschitz_bound(A, b, lam, z, tol_support: float = 1e-6) -> float:
    """``(1/lam) ||A_I^+ r||`` for a LASSO solution ``z`` with support ``I``."""
    z = np.asarray(z, dtype=float)
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    I = np.flatnonzero(np.abs(z) > tol_support * scale)
    if I.size == 0:
        return 0.0
    r = b - A @ z
    return float(np.linalg.norm(pseudoinverse(A[:, I]) @ r)) / lam


def phi_partials(A, b, lam: float, x):
    """Partial derivatives of ``phi(b, lam, x) = A^T (Ax - b) / (lam ||Ax - b||)``.

    Returns ``(d_b, d_lambda, d_x)`` of shapes ``(n, m)``, ``(n,)`` and
    ``(n, n)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    e = A @ x - b
    ne = float(np.linalg.norm(e))
    if ne <= 1e-12 * max(1.0, float(np.linalg.norm(b))):
        raise ZeroResidual("phi is undefined at a zero residual")
    u = e / ne
    PA = _project_out(u, A)
    d_b = -PA.T / (lam * ne)
    d_lambda = -(A.T @ e) / (lam**2 * ne)
    d_x = (A.T @ PA) / (lam * ne)
    return d_b, d_lambda, 0.5 * (d_x + d_x.T)


def phi(A, b, lam, x):
    e = np.asarray(A) @ x - b
    return np.asarray(A).T @ e / (lam * np.linalg.norm(e))


# --- finite-difference validators -------------------------------------------


def _resolve(p, b, lam, x0, s):
    return solve_srlasso(p.with_data(b=b, lam=lam), s, x0=x0).x


def _central(fun, h, richardson):
    """Central difference of ``fun`` at 0 with step ``h``; with ``richardson``
    the steps ``h`` and ``h/2`` are combined to cancel the ``h^2`` term."""
    d_h = (fun(h) - fun(-h)) / (2 * h)
    if not richardson:
        return d_h
    d_h2 = (fun(h / 2) - fun(-h / 2)) / h
    return (4 * d_h2 - d_h) / 3


def fd_jacobian_b(p: ProblemInstance, x, h: Optional[float] = None,
                  s: SolverSettings = FD_SETTINGS, richardson: bool = True) -> np.ndarray:
    """Central-difference estimate of ``dx/db`` by warm-started re-solves.

    The default step is ``1e-6 * max(1, ||b||)``.
    """
    m = p.A.shape[0]
    h = h or 1e-6 * max(1.0, float(np.linalg.norm(p.b)))
    cols = []
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        cols.append(_central(lambda t: _resolve(p, p.b + t * e, p.lam, x, s), h, richardson))
    return np.column_stack(cols)


def fd_jacobian_lambda(p: ProblemInstance, x, h: Optional[float] = None,
                       s: SolverSettings = FD_SETTINGS, richardson: bool = True) -> np.ndarray:
    """Central-difference estimate of ``dx/dlam`` (default step ``1e-6 * max(1, lam)``)."""
    h = h or 1e-6 * max(1.0, p.lam)
    return _central(lambda t: _resolve(p, p.b, p.lam + t, x, s), h, richardson)


def fd_directional(p: ProblemInstance, x, q, alpha: float, t: float = 1e-6,
                   s: SolverSettings = FD_SETTINGS) -> np.ndarray:
    """One-sided difference ``(S(b + t q, lam + t alpha) - S(b, lam)) / t``."""
    q = np.asarray(q, dtype=float)
    x0 = solve_srlasso(p, s, x0=x).x
    return (_resolve(p, p.b + t * q, p.lam + t * alpha, x, s) - x0) / t


def relative_error(est, ref) -> float:
    """Max-norm difference over the larger of the two max-norms (0 when both vanish)."""
    est, ref = np.asarray(est, dtype=float), np.asarray(ref, dtype=float)
    if not ref.size:
        return 0.0
    scale = max(float(np.max(np.abs(ref))), float(np.max(np.abs(est))))
    return float(np.max(np.abs(est - ref)) / scale) if scale > 0 else 0.0


def sensitivity_report(p: ProblemInstance, pair: PrimalDualPair, sets: SupportSets,
                       q=None, alpha: float = 0.0,
                       lasso_pair: Optional[PrimalDualPair] = None,
                       lasso_lam: Optional[float] = None,
                       validate: bool = False) -> SensitivityReport:
    """Everything computable at ``pair``: bounds, Jacobians under the strong
    condition and the directional derivative along ``(q, alpha)`` under the
    intermediate one.  With ``validate`` the derivatives are compared with
    finite differences and the relative errors stored in ``validation``."""
    rep = lipschitz_bounds(p, pair, sets, lasso_pair, lasso_lam)
    if not sets.residual_nonzero:
        return rep
    strong = check_strong(p, pair, sets).strong
    inter = check_intermediate(p, pair, sets).intermediate
    if strong:
        rep.jacobian_b, rep.jacobian_lambda = jacobian_strong(p, pair, sets)
        if validate:
            rep.validation["jacobian_b_rel_err"] = relative_error(
                fd_jacobian_b(p, pair.x), rep.jacobian_b)
            rep.validation["jacobian_lambda_rel_err"] = relative_error(
                fd_jacobian_lambda(p, pair.x), rep.jacobian_lambda)
    if inter:
        qv = np.zeros(p.A.shape[0]) if q is None else np.asarray(q, dtype=float)
        try:
            w, K = directional_derivative(p, pair, sets, qv, alpha)
        except Degenerate as exc:
            rep.validation["directional_error"] = str(exc)
        else:
            rep.directional_derivative, rep.K_set = w, K
            if validate and (np.any(qv) or alpha):
                rep.validation["directional_rel_err"] = relative_error(
                    fd_directional(p, pair.x, qv, alpha), w)
    return rep

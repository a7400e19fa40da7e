"""Primal-dual solvers for the square-root LASSO and the LASSO.

Both problems are solved by the same first-order primal-dual splitting
(Chambolle-Pock) loop, stopped on a relative duality gap.  Every so often
the current support and signs are handed to an exact active-set solve;
whenever that produces a point whose duality gap certifies optimality the
solve ends there.  The gap is always evaluated with a dual vector that has
been scaled to exact feasibility, so a reported gap is a genuine bound.

Sign conventions follow the optimization literature: for the square-root
LASSO the dual vector ``y`` solves ``max <b, y>`` over the unit ball with
``||A^T y||_inf <= lam``, and at a solution with nonzero residual
``y = (b - Ax) / ||b - Ax||``.  For the LASSO the dual vector is the scaled
residual.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DualInfeasible, NotConverged, TooLarge, ZeroResidual
from .linalg import rank_tolerance

log = logging.getLogger(__name__)

#: Dual-constraint slack accepted by :func:`duality_gap`.
DUAL_FEAS_TOL = 1e-6
#: Relative violation below which the active-set solve does not add an index.
_ADD_TOL = 1e-12


@dataclass(frozen=True)
class ProblemInstance:
    """Data ``(A, b, lam)`` of one problem."""

    A: np.ndarray
    b: np.ndarray
    lam: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).ravel()
        if A.ndim != 2:
            raise ValueError(f"A must be 2-D, got shape {A.shape}")
        if b.size != A.shape[0]:
            raise ValueError(f"b has length {b.size}, A has {A.shape[0]} rows")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        lam = float(self.lam)
        if not (lam > 0 and np.isfinite(lam)):
            raise ValueError(f"lam must be positive and finite, got {self.lam!r}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lam", lam)

    @property
    def shape(self):
        return self.A.shape

    def with_data(self, b=None, lam=None) -> "ProblemInstance":
        return ProblemInstance(self.A, self.b if b is None else b,
                               self.lam if lam is None else lam)

    @property
    def residual_floor(self) -> float:
        return 1e-12 * max(1.0, float(np.linalg.norm(self.b)))


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-9
    max_iter: int = 200_000
    step_ratio: float = 1.0
    check_every: int = 10
    polish_every: int = 50

    def __post_init__(self):
        if not 0 < self.gap_tol < 1:
            raise ValueError("gap_tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.step_ratio > 0:
            raise ValueError("step_ratio must be positive")


@dataclass
class PrimalDualPair:
    x: np.ndarray
    y: np.ndarray
    residual: np.ndarray
    residual_norm: float
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    converged: bool
    program: str = "SR"
    polished: bool = field(default=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "residual_norm": self.residual_norm,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def sr_objective(A, b, lam, x) -> float:
    return float(np.linalg.norm(A @ x - b) + lam * np.abs(x).sum())


def lasso_objective(A, b, lam, x) -> float:
    r = A @ x - b
    return float(0.5 * (r @ r) + lam * np.abs(x).sum())


def soft_threshold(v, t):
    """Componentwise proximal map of ``t * ||.||_1``."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l2_ball(v, radius=1.0):
    nv = np.linalg.norm(v)
    return v if nv <= radius else v * (radius / nv)


def primal_dual_splitting(K, prox_g, prox_fconj, x, y, tau, sigma, max_iter,
                          monitor: Callable[[int, np.ndarray, np.ndarray], bool],
                          every: int = 10, theta: float = 1.0):
    """Chambolle-Pock iteration for ``min_x f(Kx) + g(x)``.

    ``prox_g(v, tau)`` and ``prox_fconj(v, sigma)`` are the proximal maps
    of ``tau g`` and ``sigma f^*``.  ``monitor(k, x, y)`` is called every
    ``every`` iterations and stops the loop by returning True.

    Returns ``(x, y, iterations, stopped)``.
    """
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    x_bar = x.copy()
    KT = K.T
    for k in range(1, max_iter + 1):
        y = prox_fconj(y + sigma * (K @ x_bar), sigma)
        x_new = prox_g(x - tau * (KT @ y), tau)
        x_bar = x_new + theta * (x_new - x)
        x = x_new
        if k % every == 0 and monitor(k, x, y):
            return x, y, k, True
    return x, y, max_iter, False


def _step_sizes(A, ratio):
    normA = float(np.linalg.norm(A, 2)) if A.size else 0.0
    c = np.sqrt(0.95) / max(normA, 1e-300)
    return ratio * c, c / ratio


def _support_and_signs(x, rel=1e-10):
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    K = np.flatnonzero(np.abs(x) > rel * scale)
    return list(K), list(np.sign(x[K]))


def _restricted_qr(AK):
    """Thin QR of ``A_K`` or None when it is numerically rank deficient."""
    if AK.shape[1] > AK.shape[0]:
        return None
    Q, R = np.linalg.qr(AK)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= rank_tolerance(AK.shape, d.max()):
        return None
    return Q, R


def _restricted_svd(AK):
    U, S, Vt = np.linalg.svd(AK, full_matrices=False)
    if S.size and S[-1] <= rank_tolerance(AK.shape, S[0]):
        return None
    return U, S, Vt


def _least_squares(Q, R, b):
    """Least-squares coefficients and residual from a thin QR; the residual
    is reorthogonalized against ``Q`` once."""
    Qb = Q.T @ b
    r = b - Q @ Qb
    r -= Q @ (Q.T @ r)
    return np.linalg.solve(R, Qb), r


def _drop(K, s, bad):
    return ([k for k, d in zip(K, bad) if not d],
            [v for v, d in zip(s, bad) if not d])


def _sr_active_set(A, b, lam, K, s, floor, max_steps=None):
    """Exact solve of the square-root LASSO on a guessed signed support.

    On support ``K`` with signs ``s`` the stationarity condition
    ``A_K^T (b - A_K x) = lam ||b - A_K x|| s`` has the closed form
    ``x = x_ls - lam * rho * G^{-1} s`` with ``G = A_K^T A_K`` and
    ``rho = ||r_ls|| / sqrt(1 - lam^2 s^T G^{-1} s)``.  Indices with
    inconsistent signs are dropped and the most violated dual constraint
    is added until the guess is self-consistent or a guess repeats.

    Returns ``(x, y)`` with ``y`` a (not yet scaled) dual candidate, or None.
    For an exact fit the candidate is ``lam (A_K^+)^T s``.
    """
    n = A.shape[1]
    K, s = list(K), [float(v) for v in s]
    seen = set()
    max_steps = max_steps or 2 * n + 10
    for _ in range(max_steps):
        order = np.argsort(K)
        K = [K[i] for i in order]
        s = [s[i] for i in order]
        key = (tuple(K), tuple(s))
        if key in seen:
            return None
        seen.add(key)
        sv = np.asarray(s)
        if K:
            f = _restricted_qr(A[:, K])
            if f is None:
                return None
            Q, R = f
            x_ls, r_ls = _least_squares(Q, R, b)
            Rts = np.linalg.solve(R.T, sv)
            u = np.linalg.solve(R, Rts)
            q = float(Rts @ Rts)
        else:
            x_ls = u = Rts = np.zeros(0)
            Q = np.zeros((b.size, 0))
            r_ls = b
            q = 0.0
        nr = float(np.linalg.norm(r_ls))
        if nr <= floor:
            bad = sv * x_ls <= 0
            if np.any(bad):
                K, s = _drop(K, s, bad)
                continue
            x = np.zeros(n)
            x[K] = x_ls
            y = lam * (Q @ Rts) if K else np.zeros_like(b)
            return x, y
        d = 1.0 - lam**2 * q
        if d <= 0:
            return None
        rho = nr / np.sqrt(d)
        xK = x_ls - lam * rho * u
        bad = sv * xK <= 0
        if np.any(bad):
            K, s = _drop(K, s, bad)
            continue
        x = np.zeros(n)
        x[K] = xK
        # b - A_K x_K = r_ls + lam rho A_K G^{-1} s, and its norm is rho; this
        # form of the certificate avoids the cancellation in b - Ax.
        y = r_ls / rho + lam * (Q @ Rts)
        corr = A.T @ y
        viol = np.abs(corr) - lam
        viol[K] = -np.inf
        j = int(np.argmax(viol)) if n else 0
        if n and viol[j] > _ADD_TOL * lam:
            K.append(j)
            s.append(float(np.sign(corr[j])))
            continue
        return x, y
    return None


def _lasso_active_set(A, b, lam, K, s, max_steps=None):
    """Exact LASSO solve on a guessed signed support (same add/drop loop)."""
    n = A.shape[1]
    K, s = list(K), [float(v) for v in s]
    seen = set()
    max_steps = max_steps or 2 * n + 10
    for _ in range(max_steps):
        order = np.argsort(K)
        K = [K[i] for i in order]
        s = [s[i] for i in order]
        key = (tuple(K), tuple(s))
        if key in seen:
            return None
        seen.add(key)
        sv = np.asarray(s)
        if K:
            f = _restricted_qr(A[:, K])
            if f is None:
                return None
            Q, R = f
            # G x = A_K^T b - lam s  with  G = R^T R
            x_ls, r_ls = _least_squares(Q, R, b)
            Rts = np.linalg.solve(R.T, sv)
            xK = x_ls - lam * np.linalg.solve(R, Rts)
            bad = sv * xK <= 0
            if np.any(bad):
                K, s = _drop(K, s, bad)
                continue
            r = r_ls + lam * (Q @ Rts)
        else:
            xK = np.zeros(0)
            r = b.copy()
        x = np.zeros(n)
        x[K] = xK
        corr = A.T @ r
        viol = np.abs(corr) - lam
        viol[K] = -np.inf
        j = int(np.argmax(viol)) if n else 0
        if n and viol[j] > _ADD_TOL * lam:
            K.append(j)
            s.append(float(np.sign(corr[j])))
            continue
        return x, r
    return None


def _homotopy_support(A, b, lam, program, max_steps=None):
    """Signed support of the solution from the LASSO homotopy path.

    The LASSO solution ``z(mu)`` is piecewise linear in ``mu``; it is traced
    downward from ``mu = ||A^T b||_inf`` one breakpoint at a time.  For the
    LASSO the path is stopped at ``mu = lam``.  For the square-root LASSO
    it is stopped where ``mu = lam ||b - A z(mu)||`` (on a segment this is
    a quadratic equation in ``mu``), since there ``z(mu)`` satisfies the
    square-root LASSO optimality conditions at ``lam``; if the path reaches
    ``mu = 0`` first the interpolating endpoint is returned.

    Returns ``(K, signs)`` or None when the path degenerates (rank loss).
    """
    m, n = A.shape
    corr = A.T @ b
    j = int(np.argmax(np.abs(corr)))
    mu = float(abs(corr[j]))
    if mu == 0.0:
        return [], []
    if program == "SR" and lam * np.linalg.norm(b) >= mu:
        return [], []
    if program == "UC" and lam >= mu:
        return [], []
    K, s = [j], [float(np.sign(corr[j]))]
    x = np.zeros(n)
    r = b.astype(float).copy()
    max_steps = max_steps or 8 * max(m, n)
    just_dropped = None
    for _ in range(max_steps):
        AK = A[:, K]
        f = _restricted_qr(AK)
        if f is None:
            return None
        Q, R = f
        sv = np.asarray(s)
        d = np.linalg.solve(R, np.linalg.solve(R.T, sv))
        # recompute the point on the path from scratch to avoid drift
        x[:] = 0.0
        x[K] = np.linalg.solve(R, Q.T @ b) - mu * d
        r = b - AK @ x[K]
        w = AK @ d
        a = A.T @ w
        c = A.T @ r
        # next breakpoint: an inactive correlation reaches the boundary or an
        # active coefficient reaches zero
        inactive = np.ones(n, dtype=bool)
        inactive[K] = False
        if just_dropped is not None:
            # a coefficient that just crossed zero stays out for one step
            inactive[just_dropped] = False
        best_mu, event = 0.0, None
        with np.errstate(divide="ignore", invalid="ignore"):
            # with |K| = m the residual is mu A_K^{-T} s and no index can join
            for sign in ((1.0, -1.0) if len(K) < m else ()):
                cand = (c - mu * a) / (sign - a)
                ok = inactive & np.isfinite(cand) & (cand < mu * (1 - 1e-12)) & (cand > best_mu)
                if np.any(ok):
                    i = int(np.flatnonzero(ok)[np.argmax(cand[ok])])
                    best_mu, event = float(cand[i]), ("add", i, sign)
            xK = x[K]
            cand = mu + xK / d
            # only coefficients moving towards zero can leave the support
            ok = (np.isfinite(cand) & (d * sv < 0) & (cand < mu * (1 - 1e-12))
                  & (cand > best_mu))
            if np.any(ok):
                i = int(np.flatnonzero(ok)[np.argmax(cand[ok])])
                best_mu, event = float(cand[i]), ("drop", K[i], 0.0)
        span = mu - best_mu
        if program == "UC" and best_mu <= lam:
            return K, s
        if program == "SR":
            # (mu - t)^2 = lam^2 ||r - t w||^2 for the smallest t in [0, span]
            qa = 1.0 - lam**2 * (w @ w)
            qb = -2.0 * mu + 2.0 * lam**2 * (r @ w)
            qc = mu**2 - lam**2 * (r @ r)
            roots = np.roots([qa, qb, qc]) if abs(qa) > 1e-300 else np.roots([qb, qc])
            roots = [t.real for t in np.atleast_1d(roots)
                     if abs(t.imag) <= 1e-12 * max(1.0, abs(t.real))]
            hit = [t for t in roots if -1e-12 * mu <= t <= span * (1 + 1e-12)]
            if hit:
                return K, s
        if event is None:
            # the path ends at mu = 0 on this support (interpolation)
            return K, s
        mu = best_mu
        kind, i, sign = event
        just_dropped = None
        if kind == "add":
            K.append(i)
            s.append(sign)
        else:
            pos = K.index(i)
            del K[pos], s[pos]
            just_dropped = i
    return None


class _Tracker:
    """Keeps the iterate with the smallest certified duality gap."""

    def __init__(self, program, A, b, lam):
        self.program, self.A, self.b, self.lam = program, A, b, lam
        self.best = None  # (gap, x, y, P, D, polished)

    def _sr_dual(self, v):
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.zeros_like(v), 0.0
        ninf = np.max(np.abs(self.A.T @ v)) if self.A.size else 0.0
        theta = 1.0 / nv
        if ninf > 0:
            theta = min(theta, self.lam / ninf)
        y = theta * v
        D = float(self.b @ y)
        if D < 0:
            return np.zeros_like(v), 0.0
        return y, D

    def _lasso_dual(self, v):
        vv = float(v @ v)
        if vv == 0:
            return np.zeros_like(v), 0.0
        ninf = np.max(np.abs(self.A.T @ v)) if self.A.size else 0.0
        theta = max(0.0, float(self.b @ v) / vv)
        if ninf > 0:
            theta = min(theta, self.lam / ninf)
        y = theta * v
        return y, float(self.b @ y - 0.5 * (y @ y))

    def consider(self, x, duals, polished=False):
        A, b, lam = self.A, self.b, self.lam
        r = b - A @ x
        if self.program == "SR":
            P = float(np.linalg.norm(r) + lam * np.abs(x).sum())
            # y = 0 is always dual feasible
            cands = [(np.zeros_like(b), 0.0)] + [self._sr_dual(v) for v in duals if v is not None]
            nr = np.linalg.norm(r)
            if nr > 0:
                cands.append(self._sr_dual(r / nr))
        else:
            P = float(0.5 * (r @ r) + lam * np.abs(x).sum())
            cands = [self._lasso_dual(v) for v in duals if v is not None]
            cands.append(self._lasso_dual(r))
        y, D = max(cands, key=lambda t: t[1])
        gap = P - D
        if self.best is None or gap < self.best[0]:
            self.best = (gap, x.copy(), y, P, D, polished)
        return gap, P

    def converged(self, tol):
        gap, _, _, P, _, _ = self.best
        return gap <= tol * max(1.0, abs(P))


def _solve(program, p: ProblemInstance, s: SolverSettings, x0=None, y0=None,
           raise_on_fail=False) -> PrimalDualPair:
    A, b, lam = p.A, p.b, p.lam
    m, n = A.shape
    track = _Tracker(program, A, b, lam)
    floor = p.residual_floor

    last_key = [None]

    tried_empty = [False]

    def polish(x):
        K, sg = _support_and_signs(x)
        key = (tuple(K), tuple(sg))
        if key == last_key[0]:
            return
        last_key[0] = key
        out = _active_set(K, sg)
        if out is not None:
            track.consider(out[0], [out[1]], polished=True)
        if not track.converged(s.gap_tol) and not tried_empty[0]:
            # a stale warm start can trap the add/drop loop, and an exact fit
            # may come with an infeasible certificate; the homotopy path
            # identifies the support from scratch
            tried_empty[0] = True
            guess = _homotopy_support(A, b, lam, program)
            if guess is not None:
                out = _active_set(*guess)
                if out is not None:
                    track.consider(out[0], [out[1]], polished=True)

    def _active_set(K, sg):
        if program == "SR":
            return _sr_active_set(A, b, lam, K, sg, floor)
        return _lasso_active_set(A, b, lam, K, sg)

    x_start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    track.consider(x_start, [None if y0 is None else np.asarray(y0, dtype=float)])
    polish(x_start)
    iters = 0
    nb = float(np.linalg.norm(b))
    if not track.converged(s.gap_tol) and n > 0 and nb > 0:
        # The iteration runs on data scaled to ||b|| = 1 so that primal and
        # dual variables have comparable magnitude; x(c b) = c x(b) for the
        # square-root LASSO and x(c b, c lam) = c x(b, lam) for the LASSO.
        bs = b / nb
        lam_s = lam if program == "SR" else lam / nb
        y_scale = 1.0 if program == "SR" else nb
        tau, sigma = _step_sizes(A, s.step_ratio)
        prox_g = lambda v, t: soft_threshold(v, t * lam_s)
        if program == "SR":
            prox_fconj = lambda v, sg: project_l2_ball(v - sg * bs)
        else:
            prox_fconj = lambda v, sg: (v - sg * bs) / (1.0 + sg)
        # the splitting's dual variable is the negated certificate
        y_start = (np.zeros(m) if y0 is None
                   else -np.asarray(y0, dtype=float) / y_scale)
        polish_every = max(s.polish_every, s.check_every)

        def monitor(k, xs, ycp):
            x = nb * xs
            track.consider(x, [-y_scale * ycp])
            if k % polish_every == 0:
                polish(x)
            return track.converged(s.gap_tol)

        _, _, iters, _ = primal_dual_splitting(
            A, prox_g, prox_fconj, x_start / nb, y_start, tau, sigma,
            s.max_iter, monitor, every=s.check_every)
    gap, x, y, P, D, polished = track.best
    r = b - A @ x
    pair = PrimalDualPair(
        x=x, y=y, residual=r, residual_norm=float(np.linalg.norm(r)),
        primal_value=P, dual_value=D, gap=float(gap), iterations=iters,
        converged=bool(track.converged(s.gap_tol)), program=program,
        polished=polished)
    if not pair.converged:
        log.warning("%s solve stopped after %d iterations with gap %.3e",
                    program, iters, gap)
        if raise_on_fail:
            raise NotConverged(f"gap {gap:.3e} after {iters} iterations", pair)
    return pair


def solve_srlasso(p: ProblemInstance, s: Optional[SolverSettings] = None,
                  x0=None, y0=None, raise_on_fail=False) -> PrimalDualPair:
    """Solve ``min ||Ax - b|| + lam ||x||_1`` with a duality-gap certificate.

    ``x0``/``y0`` warm-start the iteration.  If the gap target is not met
    within ``max_iter`` iterations the best iterate is returned with
    ``converged=False`` (or :class:`NotConverged` is raised when
    ``raise_on_fail`` is set).
    """
    return _solve("SR", p, s or SolverSettings(), x0, y0, raise_on_fail)


def solve_lasso(p: ProblemInstance, s: Optional[SolverSettings] = None,
                x0=None, y0=None, raise_on_fail=False) -> PrimalDualPair:
    """Solve ``min 0.5 ||Az - b||^2 + lam ||z||_1`` with a duality-gap certificate."""
    return _solve("UC", p, s or SolverSettings(), x0, y0, raise_on_fail)


def dual_from_primal(p: ProblemInstance, x) -> np.ndarray:
    """Normalized residual ``(b - Ax) / ||Ax - b||``, the unique dual solution
    whenever ``x`` solves the square-root LASSO with nonzero residual."""
    r = p.b - p.A @ np.asarray(x, dtype=float)
    nr = float(np.linalg.norm(r))
    if nr <= p.residual_floor:
        raise ZeroResidual(f"residual norm {nr:.3e} is below the floor {p.residual_floor:.3e}")
    return r / nr


def duality_gap(p: ProblemInstance, x, y) -> float:
    """Primal objective at ``x`` minus dual objective ``<b, y>``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ny = float(np.linalg.norm(y))
    ninf = float(np.max(np.abs(p.A.T @ y))) if p.A.size else 0.0
    if ny > 1 + DUAL_FEAS_TOL or ninf > p.lam * (1 + DUAL_FEAS_TOL):
        raise DualInfeasible(f"||y|| = {ny:.6g}, ||A^T y||_inf = {ninf:.6g}, lam = {p.lam:.6g}")
    return sr_objective(p.A, p.b, p.lam, x) - float(p.b @ y)


def brute_force_oracle(p: ProblemInstance, cert_tol: float = 1e-8,
                       return_info: bool = False):
    """Global minimizer of the square-root LASSO by enumerating supports.

    For every support ``K`` with ``A_K`` of full column rank and every sign
    pattern, the restricted smooth problem is solved exactly; candidates
    whose signs are consistent are kept.  Candidates with nonzero residual
    must also pass the first-order test ``||A^T y||_inf <= lam (1 + cert_tol)``
    with ``y`` the normalized residual; exact-fit candidates are kept as
    feasible points.  Ties within ``1e-10`` of the best objective go to the
    smallest, then lexicographically smallest, support.

    Independent of :func:`solve_srlasso`.  Limited to ``n <= 12``.
    """
    A, b, lam = p.A, p.b, p.lam
    m, n = A.shape
    if n > 12:
        raise TooLarge(f"brute force limited to n <= 12, got n = {n}")
    floor = p.residual_floor
    nb = float(np.linalg.norm(b))
    cands = []  # (objective, support, x, certified)
    if nb <= floor:
        cands.append((0.0, (), np.zeros(n), True))
    else:
        y0 = b / nb
        ok = (np.max(np.abs(A.T @ y0)) if n else 0.0) <= lam * (1 + cert_tol)
        cands.append((nb, (), np.zeros(n), bool(ok)))
    for k in range(1, n + 1):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
        for K in itertools.combinations(range(n), k):
            AK = A[:, K]
            f = _restricted_svd(AK)
            if f is None:
                continue
            U, S, Vt = f
            x_ls = Vt.T @ ((U.T @ b) / S)
            r_ls = b - AK @ x_ls
            nr = float(np.linalg.norm(r_ls))
            if nr <= floor:
                if np.all(x_ls != 0):
                    cands.append((lam * float(np.abs(x_ls).sum()), K,
                                  _embed(x_ls, K, n), False))
                continue
            Ginv = (Vt.T / S**2) @ Vt
            Us = signs @ Ginv
            q = np.einsum("ij,ij->i", Us, signs)
            d = 1.0 - lam**2 * q
            good = d > 0
            if not np.any(good):
                continue
            rho = nr / np.sqrt(d[good])
            X = x_ls[None, :] - lam * rho[:, None] * Us[good]
            consistent = np.all(signs[good] * X > 0, axis=1)
            for xK in X[consistent]:
                x = _embed(xK, K, n)
                r = b - A @ x
                y = r / np.linalg.norm(r)
                ok = np.max(np.abs(A.T @ y)) <= lam * (1 + cert_tol)
                if ok:
                    cands.append((sr_objective(A, b, lam, x), K, x, True))
    certified = [c for c in cands if c[3]]
    exact = [c for c in cands if not c[3] and c[1] != ()]
    pool = certified + exact if (certified or exact) else cands
    best_val = min(c[0] for c in pool)
    ties = [c for c in pool if c[0] <= best_val + 1e-10]
    ties.sort(key=lambda c: (len(c[1]), c[1]))
    winner = ties[0]
    if return_info:
        return winner[2], {"objective": winner[0], "support": winner[1],
                           "certified": winner[3], "candidates": len(cands)}
    return winner[2]


def _embed(vals, K, n):
    x = np.zeros(n)
    x[list(K)] = vals
    return x

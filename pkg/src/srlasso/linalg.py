"""Dense linear algebra primitives.

SVD-based pseudoinverse and rank, range and kernel tests with explicit
tolerances, and the rank-one (Sherman-Morrison-Woodbury) inverse of
``M^T (I - v v^T) M`` together with its eigenvalue bound.

All routines work on plain ``numpy`` arrays and recompute their
factorizations on every call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IllConditioned, InRange, RankDeficient

#: Relative cutoff used for numerical rank decisions.
RANK_RTOL = 1e-10
#: Residual above which :func:`smw_inverse` refuses its own output.
SMW_RESIDUAL_LIMIT = 1e-6


@dataclass(frozen=True)
class ColumnSelection:
    """Strictly increasing 0-based column indices into a matrix with
    ``source_cols`` columns."""

    indices: tuple[int, ...]
    source_cols: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.source_cols < 0:
            raise ValueError("source_cols must be nonnegative")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= self.source_cols):
            raise ValueError(f"indices out of range for {self.source_cols} columns")

    @classmethod
    def from_mask(cls, mask) -> "ColumnSelection":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask)), mask.size)

    @classmethod
    def of(cls, indices: Iterable[int], source_cols: int) -> "ColumnSelection":
        return cls(tuple(sorted(set(int(i) for i in indices))), source_cols)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.source_cols, dtype=bool)
        m[list(self.indices)] = True
        return m

    def complement(self) -> "ColumnSelection":
        return ColumnSelection.from_mask(~self.mask)

    def issubset(self, other: "ColumnSelection") -> bool:
        return set(self.indices) <= set(other.indices)

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.indices]


@dataclass(frozen=True)
class SvdSummary:
    sigma_max: float
    sigma_min_nonzero: float
    numerical_rank: int
    rank_tolerance: float


def as_matrix(M) -> np.ndarray:
    """Return ``M`` as a finite 2-D float array."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def columns(A, sel) -> np.ndarray:
    """Submatrix of ``A`` made of the selected columns (keeps 2-D shape)."""
    idx = sel.array if isinstance(sel, ColumnSelection) else np.asarray(sel, dtype=int)
    return np.asarray(A)[:, idx]


def embed(values, sel, n: int) -> np.ndarray:
    """Zero-pad ``values`` into an ``n``-vector at positions ``sel``."""
    out = np.zeros(n)
    idx = sel.array if isinstance(sel, ColumnSelection) else np.asarray(sel, dtype=int)
    out[idx] = values
    return out


def rank_tolerance(shape: Sequence[int], sigma_max: float) -> float:
    tol = RANK_RTOL * sigma_max * max(shape)
    return tol if tol > 0 else np.finfo(float).tiny


def svd_summary(M) -> SvdSummary:
    M = as_matrix(M)
    if M.size == 0:
        return SvdSummary(0.0, 0.0, 0, np.finfo(float).tiny)
    s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0])
    tol = rank_tolerance(M.shape, smax)
    kept = s[s > tol]
    return SvdSummary(smax, float(kept[-1]) if kept.size else 0.0, int(kept.size), tol)


def _truncated_svd(M):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > rank_tolerance(M.shape, smax))) if s.size else 0
    return U[:, :r], s[:r], Vt[:r]


def pseudoinverse(M) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``1e-10 * sigma_max * max(rows, cols)``
    are treated as zero, so the zero matrix maps to the zero matrix.

    >>> pseudoinverse(np.array([[3.0], [4.0]]))
    array([[0.12, 0.16]])
    """
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    U, s, Vt = _truncated_svd(M)
    return (Vt.T / s) @ U.T


def range_basis(M) -> np.ndarray:
    """Orthonormal basis (as columns) of the range of ``M``."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    return _truncated_svd(M)[0]


def range_test(M, u, tol: float = 1e-10) -> bool:
    """True iff ``u`` numerically lies in ``rge M``.

    The test is ``||(I - M M^+) u|| <= tol * max(1, ||u||)``.
    """
    u = np.asarray(u, dtype=float).ravel()
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[0] != u.size:
        raise ValueError(f"dimension mismatch: {M.shape} vs {u.size}")
    Q = range_basis(M) if M.shape[1] else np.zeros((u.size, 0))
    resid = u - Q @ (Q.T @ u)
    return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(u)))


def nullspace_projector(M) -> np.ndarray:
    """Orthogonal projector onto ``ker M^T`` (a rows x rows matrix)."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    Q = range_basis(M) if M.shape[1] else np.zeros((M.shape[0], 0))
    P = np.eye(M.shape[0]) - Q @ Q.T
    return 0.5 * (P + P.T)


def _check_unit(v, m):
    v = np.asarray(v, dtype=float).ravel()
    if v.size != m:
        raise ValueError(f"vector length {v.size} does not match {m} rows")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError(f"vector must have unit norm, got {np.linalg.norm(v)!r}")
    return v


def _smw_parts(M, v):
    """Shared pieces of the rank-one inverse: (M^T M)^{-1}, M^+ v, 1 - v^T M M^+ v."""
    M = as_matrix(M)
    v = _check_unit(v, M.shape[0])
    k = M.shape[1]
    if k == 0:
        return np.zeros((0, 0)), np.zeros(0), 1.0, M, v
    info = svd_summary(M)
    if info.numerical_rank < k:
        raise RankDeficient(
            f"matrix has numerical rank {info.numerical_rank} < {k} columns")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    gram_inv = (Vt.T / s**2) @ Vt
    Mpv = (Vt.T / s) @ (U.T @ v)
    proj = U.T @ v
    denom = 1.0 - float(proj @ proj)
    if denom <= RANK_RTOL * max(M.shape):
        raise InRange(f"vector lies numerically in the range (1 - v'MM^+v = {denom:.3e})")
    return gram_inv, Mpv, denom, M, v


def smw_inverse(M, v) -> np.ndarray:
    """Inverse of ``W = M^T (I - v v^T) M`` by the rank-one update formula.

    ``W^{-1} = (M^T M)^{-1} + (M^+ v)(M^+ v)^T / (1 - v^T M M^+ v)``.
    Requires full column rank and ``v`` outside ``rge M``; the result is
    checked against ``W`` and rejected when ``||W W^{-1} - I||_max > 1e-6``.
    """
    gram_inv, Mpv, denom, M, v = _smw_parts(M, v)
    k = M.shape[1]
    if k == 0:
        return gram_inv
    Winv = gram_inv + np.outer(Mpv, Mpv) / denom
    Winv = 0.5 * (Winv + Winv.T)
    PM = M - np.outer(v, v @ M)
    W = M.T @ PM
    resid = np.max(np.abs(W @ Winv - np.eye(k)))
    if not resid <= SMW_RESIDUAL_LIMIT:
        raise IllConditioned(f"rank-one inverse residual {resid:.3e} exceeds {SMW_RESIDUAL_LIMIT}")
    return Winv


def smw_eigen_bound(M, v) -> float:
    """Upper bound ``1/sigma_min(M)^2 + ||M^+ v||^2 / (1 - v^T M M^+ v)``
    on the largest eigenvalue of :func:`smw_inverse`."""
    gram_inv, Mpv, denom, M, v = _smw_parts(M, v)
    if M.shape[1] == 0:
        return 0.0
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    return float(1.0 / smin**2 + (Mpv @ Mpv) / denom)

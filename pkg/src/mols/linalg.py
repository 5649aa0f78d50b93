"""Incremental QR over selected columns, least squares on a support, and
projected column norms ||P_perp phi_i||.

The basis is grown by classical Gram-Schmidt with one reorthogonalization
pass per column, which keeps Q orthonormal to working precision.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import RankDeficiencyError
from .problem import SensingMatrix

RANK_TOL = 1e-10
NORM_FLOOR = 1e-12
# Downdated squared norms below this fraction of ||phi||^2 are recomputed
# directly; the subtraction has lost too many digits by then.
REFRESH_RTOL = 1e-4


class IncrementalBasis:
    """Thin QR factorization Phi[:, cols] = Q R, extended one column at a time."""

    def __init__(self, m: int, capacity: int | None = None):
        self.m = int(m)
        cap = max(int(capacity or 0), 1)
        self._Q = np.zeros((self.m, cap), order="F")
        self._R = np.zeros((cap, cap))
        self.cols: list[int] = []

    @property
    def size(self) -> int:
        return len(self.cols)

    @property
    def Q(self) -> np.ndarray:
        return self._Q[:, : self.size]

    @property
    def R(self) -> np.ndarray:
        k = self.size
        return self._R[:k, :k]

    def copy(self) -> "IncrementalBasis":
        other = IncrementalBasis(self.m, self._Q.shape[1])
        other._Q[:] = self._Q
        other._R[:] = self._R
        other.cols = list(self.cols)
        return other

    def _grow(self, needed: int) -> None:
        cap = self._Q.shape[1]
        if needed <= cap:
            return
        new_cap = max(needed, 2 * cap)
        Q = np.zeros((self.m, new_cap), order="F")
        R = np.zeros((new_cap, new_cap))
        Q[:, :cap] = self._Q
        R[:cap, :cap] = self._R
        self._Q, self._R = Q, R

    def orthogonalize(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (v - Q Q^T v, Q^T v) using two Gram-Schmidt passes."""
        Q = self.Q
        if Q.shape[1] == 0:
            return v.copy(), np.zeros(0)
        h = Q.T @ v
        w = v - Q @ h
        h2 = Q.T @ w
        w -= Q @ h2
        return w, h + h2

    def append_column(self, index: int, column: np.ndarray) -> np.ndarray:
        """Append one column in place and return the new orthonormal vector."""
        if index in self.cols:
            raise ValueError(f"column {index} is already in the basis")
        w, h = self.orthogonalize(column)
        rho = float(np.linalg.norm(w))
        if not rho > RANK_TOL * float(np.linalg.norm(column)):
            raise RankDeficiencyError(index)
        k = self.size
        self._grow(k + 1)
        q = w / rho
        self._Q[:, k] = q
        self._R[:k, k] = h
        self._R[k, k] = rho
        self.cols.append(int(index))
        return q

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Least-squares coefficients for y on the current columns."""
        if self.size == 0:
            return np.zeros(0)
        return solve_triangular(self.R, self.Q.T @ y, lower=False)

    def residual(self, y: np.ndarray) -> np.ndarray:
        return self.orthogonalize(np.asarray(y, dtype=float))[0]


def basis_append(basis: IncrementalBasis, matrix: SensingMatrix, new_indices, inplace: bool = False) -> IncrementalBasis:
    """Extend the factorization by the columns ``new_indices`` (in order).

    Raises RankDeficiencyError carrying the offending index. With
    ``inplace=False`` the input basis is left untouched.
    """
    new_indices = [int(i) for i in new_indices]
    if set(new_indices) & set(basis.cols) or len(set(new_indices)) != len(new_indices):
        raise ValueError("new indices must be distinct and disjoint from the basis")
    out = basis if inplace else basis.copy()
    out._grow(out.size + len(new_indices))
    for i in new_indices:
        out.append_column(i, matrix.entries[:, i])
    return out


def basis_for(matrix: SensingMatrix, support) -> IncrementalBasis:
    support = [int(i) for i in support]
    b = IncrementalBasis(matrix.m, len(support))
    return basis_append(b, matrix, support, inplace=True)


def ls_on_support(matrix: SensingMatrix, y, support) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients Phi_S^+ y (in the order of ``support``) and the residual y - Phi_S c."""
    y = np.asarray(y, dtype=float)
    support = [int(i) for i in support]
    if len(support) > matrix.m:
        raise RankDeficiencyError(support[matrix.m], "support larger than the number of rows")
    basis = basis_for(matrix, support)
    coef = basis.solve(y)
    residual = y - matrix.entries[:, support] @ coef if support else y.copy()
    return coef, residual


def _floor_and_refresh(sq, matrix: SensingMatrix, basis: IncrementalBasis, idx: np.ndarray, col_norms: np.ndarray):
    """Turn squared projected norms into clamped norms, recomputing unreliable ones."""
    sq = np.maximum(sq, 0.0)
    stale = sq < REFRESH_RTOL * col_norms**2
    if np.any(stale):
        for j in np.flatnonzero(stale):
            w, _ = basis.orthogonalize(matrix.entries[:, idx[j]])
            sq[j] = float(w @ w)
    norms = np.sqrt(sq)
    floor = NORM_FLOOR * col_norms
    return np.where(norms <= floor, floor, norms), sq


def projected_column_norms(matrix: SensingMatrix, basis: IncrementalBasis, candidates) -> np.ndarray:
    """||phi_i - Q Q^T phi_i||_2 for each candidate, clamped below at the norm floor.

    Candidates already in the basis are rejected; their norm is zero by definition.
    """
    idx = np.asarray(candidates, dtype=np.intp).reshape(-1)
    if set(idx.tolist()) & set(basis.cols):
        raise ValueError("candidates must be disjoint from the basis columns")
    cols = matrix.entries[:, idx]
    col_norms = np.linalg.norm(cols, axis=0)
    sq = col_norms**2
    if basis.size:
        sq = sq - np.sum((basis.Q.T @ cols) ** 2, axis=0)
    norms, _ = _floor_and_refresh(sq, matrix, basis, idx, col_norms)
    return norms


def is_admissible(norms: np.ndarray, col_norms: np.ndarray) -> np.ndarray:
    return norms > NORM_FLOOR * col_norms


class ProjectionState:
    """Everything a greedy solver carries between iterations.

    Holds the basis over the selected columns, the residual y - P_T y, and the
    squared projected norms of every column, the latter downdated by
    ||P_perp phi_i||^2 -= (q^T phi_i)^2 for each new basis vector q.
    """

    def __init__(self, matrix: SensingMatrix, y, capacity: int | None = None):
        self.matrix = matrix
        self.y = np.asarray(y, dtype=float)
        self.basis = IncrementalBasis(matrix.m, capacity)
        self.residual = self.y.copy()
        self.col_norms = matrix.column_norms()
        self._sq = self.col_norms**2
        self.selected = np.zeros(matrix.n, dtype=bool)

    @property
    def support(self) -> list[int]:
        return self.basis.cols

    def projected_norms(self) -> np.ndarray:
        """Clamped ||P_perp phi_i|| for all n columns (selected columns read as the floor)."""
        out = NORM_FLOOR * self.col_norms
        idx = np.flatnonzero(~self.selected)
        norms, sq = _floor_and_refresh(self._sq[idx], self.matrix, self.basis, idx, self.col_norms[idx])
        self._sq[idx] = sq
        out[idx] = norms
        return out

    def append(self, indices) -> None:
        """Add columns; raises RankDeficiencyError (state unchanged for that column)."""
        A = self.matrix.entries
        for i in indices:
            i = int(i)
            q = self.basis.append_column(i, A[:, i])
            self.selected[i] = True
            self._sq -= (A.T @ q) ** 2
            self.residual -= q * (q @ self.residual)
        self._sq[self.selected] = 0.0

    def coefficients(self) -> np.ndarray:
        return self.basis.solve(self.y)

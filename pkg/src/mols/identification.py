"""The MOLS selection step.

Two interchangeable forms are provided:

* :func:`select_naive` picks the L candidates whose one-column augmentation of
  the current support leaves the smallest least-squares residual. It builds
  one trial projection per candidate and is meant as a reference.
* :func:`select_fast` ranks candidates by |<phi_i, r>| / ||P_perp phi_i||,
  which orders them identically and only needs the current residual and the
  projected column norms.

Both break ties by the lowest column index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ExhaustedCandidatesError
from .linalg import NORM_FLOOR, IncrementalBasis, basis_for, is_admissible
from .problem import SensingMatrix, SparseSignal

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SelectionOutcome:
    chosen: tuple[int, ...]
    scores: np.ndarray  # length n; -inf marks columns that were not candidates
    tie_note: bool


def top_l(scores: np.ndarray, L: int) -> tuple[tuple[int, ...], bool]:
    """Indices of the L largest finite scores (lowest index first on ties)."""
    cand = np.flatnonzero(np.isfinite(scores))
    if cand.size < L:
        raise ExhaustedCandidatesError(L, int(cand.size))
    s = scores[cand]
    order = np.lexsort((cand, -s))
    chosen = tuple(int(i) for i in cand[order[:L]])
    tie = bool(cand.size > L and abs(s[order[L - 1]] - s[order[L]]) <= TIE_TOL)
    return chosen, tie


def fast_scores(matrix: SensingMatrix, residual, basis: IncrementalBasis, projected_norms) -> np.ndarray:
    """|<phi_i, r>| / ||P_perp phi_i|| for admissible columns outside the basis, else -inf."""
    A = matrix.entries
    pn = np.asarray(projected_norms, dtype=float)
    ok = is_admissible(pn, matrix.column_norms())
    ok[basis.cols] = False
    scores = np.full(matrix.n, -np.inf)
    scores[ok] = np.abs(A[:, ok].T @ residual) / pn[ok]
    return scores


def select_fast(matrix: SensingMatrix, residual, basis: IncrementalBasis, projected_norms, L: int) -> SelectionOutcome:
    scores = fast_scores(matrix, residual, basis, projected_norms)
    chosen, tie = top_l(scores, L)
    return SelectionOutcome(chosen, scores, tie)


def augmented_residual_powers(matrix: SensingMatrix, y, current_support) -> np.ndarray:
    """||P_perp_{T u {i}} y||^2 for every column i outside T (nan where i is inadmissible)."""
    y = np.asarray(y, dtype=float)
    basis = basis_for(matrix, current_support)
    Q = basis.Q
    out = np.full(matrix.n, np.nan)
    in_support = set(basis.cols)
    for i in range(matrix.n):
        if i in in_support:
            continue
        phi = matrix.entries[:, i]
        w, _ = basis.orthogonalize(phi)
        rho = float(np.linalg.norm(w))
        if rho <= NORM_FLOOR * float(np.linalg.norm(phi)):
            continue
        Qa = np.column_stack([Q, w / rho])
        resid = y - Qa @ (Qa.T @ y)
        resid -= Qa @ (Qa.T @ resid)
        out[i] = float(resid @ resid)
    return out


def select_naive(matrix: SensingMatrix, y, current_support, L: int) -> SelectionOutcome:
    """Reference selection: minimize the sum of augmented residual powers over |S| = L."""
    powers = augmented_residual_powers(matrix, y, current_support)
    scores = np.where(np.isnan(powers), -np.inf, -powers)
    chosen, tie = top_l(scores, L)
    return SelectionOutcome(chosen, scores, tie)


def iteration_probes(
    matrix: SensingMatrix,
    residual,
    basis: IncrementalBasis,
    projected_norms,
    truth: SparseSignal,
    L: int,
) -> Optional[tuple[float, float]]:
    """(u1, vL) for the current iteration, or None once every true index is selected.

    u1 is the largest selection score over true indices not yet chosen; vL the
    L-th largest over indices that are neither true nor chosen (0 when fewer
    than L such indices exist).
    """
    scores = fast_scores(matrix, residual, basis, projected_norms)
    chosen = np.zeros(matrix.n, dtype=bool)
    chosen[basis.cols] = True
    true_mask = np.zeros(matrix.n, dtype=bool)
    true_mask[truth.support] = True
    missing = true_mask & ~chosen
    if not np.any(missing):
        return None
    s_true = scores[missing]
    u1 = float(np.max(s_true[np.isfinite(s_true)])) if np.any(np.isfinite(s_true)) else 0.0
    wrong = scores[~true_mask & ~chosen]
    wrong = np.sort(wrong[np.isfinite(wrong)])[::-1]
    vL = float(wrong[L - 1]) if wrong.size >= L else 0.0
    return u1, vL


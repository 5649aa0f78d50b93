"""Greedy solvers: MOLS (with OLS as L = 1) and OMP.

Every solver returns a :class:`RecoveryResult` carrying the full iteration
trace. Numerical failures (no admissible candidate left, a rank-deficient
support) end the run early and are reported in ``termination``; they are not
raised.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ExhaustedCandidatesError, RankDeficiencyError
from .identification import select_fast
from .linalg import ProjectionState, ls_on_support
from .problem import AlgorithmParams, ProblemInstance, SparseSignal


class Termination(str, Enum):
    RESIDUAL_BELOW_EPSILON = "residual_below_epsilon"
    REACHED_K_ITERATIONS = "reached_K_iterations"
    EXHAUSTED_CANDIDATES = "exhausted_candidates"
    RANK_DEFICIENT = "rank_deficient"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"
    CONVERGED = "converged"

    def __str__(self):
        return self.value


FAILURES = (Termination.EXHAUSTED_CANDIDATES, Termination.RANK_DEFICIENT)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    selected: tuple[int, ...]
    support: tuple[int, ...]
    residual_norm: float
    tie: bool = False
    objective: Optional[float] = None


@dataclass(frozen=True)
class RecoveryResult:
    algorithm: str
    estimated_support: tuple[int, ...]
    x_hat: np.ndarray
    iterations: int
    trace: tuple[IterationRecord, ...]
    termination: Termination
    initial_residual_norm: float

    @property
    def failed(self) -> bool:
        return self.termination in FAILURES

    @property
    def estimate(self) -> Optional[SparseSignal]:
        """Nonzero part of ``x_hat`` as a SparseSignal (None if x_hat is all zero)."""
        if not np.any(self.x_hat):
            return None
        return SparseSignal.from_dense(self.x_hat)

    @property
    def residual_norms(self) -> np.ndarray:
        """||r^k||_2 for k = 0, 1, ..., iterations."""
        return np.array([self.initial_residual_norm] + [t.residual_norm for t in self.trace])

    def selected_sequence(self) -> list[int]:
        return [i for t in self.trace for i in t.selected]


Observer = Callable[[int, ProjectionState, np.ndarray], None]


def prune_to_k(x: np.ndarray, K: int) -> tuple[int, ...]:
    """Support of the K largest |x_i|, lowest index first on ties, returned sorted."""
    idx = np.arange(x.size)
    order = np.lexsort((idx, -np.abs(x)))
    return tuple(sorted(int(i) for i in order[:K]))


def refit(instance: ProblemInstance, support) -> np.ndarray:
    x = np.zeros(instance.n)
    if len(support):
        coef, _ = ls_on_support(instance.matrix, instance.y, support)
        x[list(support)] = coef
    return x


def _finish(name, instance, K, state_support, coef, trace, termination, y_norm, prune=True):
    x_k = np.zeros(instance.n)
    if state_support:
        x_k[list(state_support)] = coef
    if prune and len(state_support) > K:
        support = prune_to_k(x_k, K)
    else:
        support = tuple(sorted(state_support))
    try:
        x_hat = refit(instance, support)
    except RankDeficiencyError:
        x_hat = x_k
        termination = Termination.RANK_DEFICIENT
    return RecoveryResult(name, support, x_hat, len(trace), tuple(trace), termination, y_norm)


def mols(instance: ProblemInstance, params: AlgorithmParams, observer: Optional[Observer] = None) -> RecoveryResult:
    """Multiple orthogonal least squares.

    Each iteration adds the L columns with the largest |<phi_i, r>| / ||P_perp phi_i||,
    re-fits y on the enlarged support and updates the residual. The loop runs
    while (||r|| >= eps and k < K) or L k < K, so at least ceil(K/L) iterations
    are always made. The K largest entries of the last estimate are kept and
    re-fitted by least squares.

    ``observer(k, state, projected_norms)`` is called before each selection.
    """
    matrix, y = instance.matrix, instance.y
    K, L = params.K, params.L
    params.validate_for(matrix.m)
    eps = params.epsilon_for(y)
    cap = params.max_iterations or K
    state = ProjectionState(matrix, y, capacity=L * K)
    y_norm = float(np.linalg.norm(y))
    r_norm = y_norm
    trace: list[IterationRecord] = []
    termination = None
    k = 0
    while (r_norm >= eps and k < K) or L * k < K:
        if k >= cap:
            termination = Termination.MAX_ITERATIONS
            break
        pn = state.projected_norms()
        if observer is not None:
            observer(k, state, pn)
        try:
            sel = select_fast(matrix, state.residual, state.basis, pn, L)
        except ExhaustedCandidatesError:
            termination = Termination.EXHAUSTED_CANDIDATES
            break
        try:
            state.append(sel.chosen)
        except RankDeficiencyError:
            termination = Termination.RANK_DEFICIENT
            break
        k += 1
        r_norm = float(np.linalg.norm(state.residual))
        trace.append(IterationRecord(k, sel.chosen, tuple(state.support), r_norm, sel.tie_note))
    if termination is None:
        termination = Termination.RESIDUAL_BELOW_EPSILON if r_norm < eps else Termination.REACHED_K_ITERATIONS
    if termination in FAILURES:
        # drop any partially appended columns of the failed iteration
        support = trace[-1].support if trace else ()
        coef = ls_on_support(matrix, y, support)[0] if support else np.zeros(0)
    else:
        support, coef = tuple(state.support), state.coefficients()
    name = "ols" if L == 1 else f"mols(L={L})"
    return _finish(name, instance, K, support, coef, trace, termination, y_norm)


def ols(instance: ProblemInstance, params: AlgorithmParams, observer: Optional[Observer] = None) -> RecoveryResult:
    """Orthogonal least squares: MOLS with one index per iteration."""
    return mols(instance, dataclasses.replace(params, L=1), observer)


def omp(instance: ProblemInstance, params: AlgorithmParams) -> RecoveryResult:
    """Orthogonal matching pursuit run for exactly K iterations (unless it fails)."""
    matrix, y = instance.matrix, instance.y
    K = params.K
    if K > matrix.m:
        params.validate_for(matrix.m)
    cap = min(K, params.max_iterations or K)
    A = matrix.entries
    state = ProjectionState(matrix, y, capacity=K)
    y_norm = float(np.linalg.norm(y))
    trace: list[IterationRecord] = []
    termination = Termination.REACHED_K_ITERATIONS
    for k in range(1, cap + 1):
        corr = np.abs(A.T @ state.residual)
        corr[state.selected] = -np.inf
        i = int(np.argmax(corr))  # argmax returns the first (lowest) index on ties
        try:
            state.append([i])
        except RankDeficiencyError:
            termination = Termination.RANK_DEFICIENT
            break
        trace.append(IterationRecord(k, (i,), tuple(state.support), float(np.linalg.norm(state.residual))))
    if cap < K and termination is Termination.REACHED_K_ITERATIONS:
        termination = Termination.MAX_ITERATIONS
    support = tuple(trace[-1].support) if trace else ()
    coef = ls_on_support(matrix, y, support)[0] if support else np.zeros(0)
    return _finish("omp", instance, K, support, coef, trace, termination, y_norm, prune=False)

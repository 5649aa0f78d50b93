"""Comparison algorithms: CoSaMP, IRLS (p = 1) and the oracle least-squares estimate.

All of them return a support of (at most) K indices with a least-squares
re-fit on it, the same output contract as the greedy solvers.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import MissingGroundTruthError, RankDeficiencyError
from .linalg import ls_on_support
from .problem import AlgorithmParams, ProblemInstance
from .solvers import IterationRecord, RecoveryResult, Termination, prune_to_k, refit

COSAMP_MAX_ITER = 50
COSAMP_STALL_RTOL = 1e-6

IRLS_EPS_START = 1.0
IRLS_EPS_FLOOR = 1e-8
IRLS_MAX_ITER = 100


def _top(values, count):
    idx = np.arange(values.size)
    return np.lexsort((idx, -values))[:count]


def cosamp(instance: ProblemInstance, params: AlgorithmParams) -> RecoveryResult:
    """Compressive sampling matching pursuit.

    The proxy contributes min(2K, m - K) indices so the merged support never
    exceeds m columns. Stops when ||r|| < eps, when ||r|| changes by less than
    1e-6 relative, or after 50 iterations.
    """
    A, y = instance.matrix.entries, instance.y
    m, n = A.shape
    K = params.K
    if K > m:
        params.validate_for(m)
    eps = params.epsilon_for(y)
    cap = min(COSAMP_MAX_ITER, params.max_iterations or COSAMP_MAX_ITER)
    n_proxy = max(1, min(2 * K, m - K))
    x = np.zeros(n)
    r = y.copy()
    y_norm = float(np.linalg.norm(y))
    prev = y_norm
    trace = []
    termination = Termination.MAX_ITERATIONS
    for it in range(1, cap + 1):
        proxy = np.abs(A.T @ r)
        omega = _top(proxy, n_proxy)
        merged = np.union1d(omega, np.flatnonzero(x))
        try:
            b, _ = ls_on_support(instance.matrix, y, merged)
        except RankDeficiencyError:
            termination = Termination.RANK_DEFICIENT
            break
        full = np.zeros(n)
        full[merged] = b
        keep = list(prune_to_k(full, K))
        x = np.zeros(n)
        x[keep] = full[keep]
        r = y - A[:, keep] @ x[keep]
        r_norm = float(np.linalg.norm(r))
        trace.append(IterationRecord(it, tuple(int(i) for i in omega), tuple(keep), r_norm))
        if r_norm < eps:
            termination = Termination.RESIDUAL_BELOW_EPSILON
            break
        if abs(prev - r_norm) < COSAMP_STALL_RTOL * prev:
            termination = Termination.STALLED
            break
        prev = r_norm
    support = tuple(sorted(int(i) for i in np.flatnonzero(x)))
    if not support and trace:
        support = trace[-1].support
    try:
        x_hat = refit(instance, support)
    except RankDeficiencyError:
        x_hat, termination = x, Termination.RANK_DEFICIENT
    return RecoveryResult("cosamp", support, x_hat, len(trace), tuple(trace), termination, y_norm)


def irls_objective(x, eps) -> float:
    """The smoothed l1 surrogate sum_i sqrt(x_i^2 + eps^2) that each reweighting step decreases."""
    return float(np.sum(np.sqrt(x * x + eps * eps)))


def irls(instance: ProblemInstance, params: AlgorithmParams) -> RecoveryResult:
    """Iteratively reweighted least squares for min ||x||_1 s.t. Phi x = y.

    Each step solves the weighted minimum-norm problem with weights
    (x_i^2 + eps^2)^(-1/2). eps starts at 1 and is divided by 10 whenever the
    relative change of x drops below sqrt(eps)/100; the run ends once that
    happens at the floor eps = 1e-8, or after 100 steps. The result is pruned
    to K entries and re-fitted.
    """
    A, y = instance.matrix.entries, instance.y
    m, n = A.shape
    K = params.K
    cap = min(IRLS_MAX_ITER, params.max_iterations or IRLS_MAX_ITER)
    y_norm = float(np.linalg.norm(y))
    trace = []
    termination = Termination.MAX_ITERATIONS
    eps = IRLS_EPS_START
    try:
        x = A.T @ cho_solve(cho_factor(A @ A.T), y)
        for it in range(1, cap + 1):
            q = np.sqrt(x * x + eps * eps)
            M = (A * q) @ A.T
            x_new = q * (A.T @ cho_solve(cho_factor(M), y))
            change = float(np.linalg.norm(x_new - x)) / max(float(np.linalg.norm(x_new)), np.finfo(float).tiny)
            x = x_new
            support = tuple(int(i) for i in np.sort(prune_to_k(x, K)))
            trace.append(IterationRecord(it, (), support, float(np.linalg.norm(y - A @ x)), objective=irls_objective(x, eps)))
            if change < math.sqrt(eps) / 100:
                if eps <= IRLS_EPS_FLOOR:
                    termination = Termination.CONVERGED
                    break
                eps = max(eps / 10, IRLS_EPS_FLOOR)
    except (LinAlgError, np.linalg.LinAlgError):
        termination = Termination.RANK_DEFICIENT
        x = np.zeros(n) if not trace else x
    support = prune_to_k(x, K)
    try:
        x_hat = refit(instance, support)
    except RankDeficiencyError:
        x_hat, termination = x, Termination.RANK_DEFICIENT
    return RecoveryResult("irls", support, x_hat, len(trace), tuple(trace), termination, y_norm)


def oracle_ls(instance: ProblemInstance, params: AlgorithmParams | None = None) -> RecoveryResult:
    """Least squares on the true support, the best estimate support knowledge allows."""
    if instance.truth is None:
        raise MissingGroundTruthError("oracle_ls needs the ground-truth support")
    support = tuple(int(i) for i in instance.truth.support)
    coef, resid = ls_on_support(instance.matrix, instance.y, support)
    x_hat = np.zeros(instance.n)
    x_hat[list(support)] = coef
    rec = IterationRecord(1, support, support, float(np.linalg.norm(resid)))
    return RecoveryResult(
        "oracle_ls", support, x_hat, 1, (rec,), Termination.CONVERGED, float(np.linalg.norm(instance.y))
    )

"""Theory checks on small problems.

Exact restricted isometry constants come from enumerating every support and
taking the extreme eigenvalues of its Gram matrix. The bound checkers turn
each recovery and convergence guarantee into a :class:`BoundCheck` whose
``applicable`` flag records whether the premises held (every isometry constant
used below 1, denominators positive). An inapplicable check is vacuous, never
a failure.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationTooLargeError, InvalidParametersError, MissingOrderError
from .identification import iteration_probes
from .problem import ProblemInstance, SensingMatrix, SparseSignal, snr_and_mar
from .solvers import RecoveryResult, Termination, mols

MAX_ENUM_N = 32
MAX_ENUM_SUPPORTS = 10**7
CHUNK = 20000
# slack for comparing two sides computed in floating point
CHECK_RTOL = 1e-9


@dataclass(frozen=True)
class RipReport:
    orders: tuple[int, ...]
    delta: tuple[float, ...]
    witness_support: tuple[tuple[int, ...], ...]
    eigen_extremes: tuple[tuple[float, float], ...]

    def constant(self, s: int) -> float:
        """delta_s; delta_0 = 0 by convention."""
        if s == 0:
            return 0.0
        try:
            return self.delta[self.orders.index(s)]
        except ValueError:
            raise MissingOrderError(s) from None

    def has(self, s: int) -> bool:
        return s == 0 or s in self.orders


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    applicable: bool

    def __post_init__(self):
        if self.satisfied and not self.applicable:
            object.__setattr__(self, "satisfied", False)

    def csv_row(self) -> str:
        return f"{self.name},{int(self.applicable)},{int(self.satisfied)},{self.lhs!r},{self.rhs!r}"


def _leq(lhs, rhs, scale=1.0):
    return lhs <= rhs + CHECK_RTOL * max(abs(rhs), scale)


def enumeration_count(n: int, max_order: int) -> int:
    return sum(math.comb(n, s) for s in range(1, max_order + 1))


def support_deviation(matrix, support) -> tuple[float, float, float]:
    """(deviation, lambda_min, lambda_max) of the Gram matrix on one support."""
    A = matrix.entries if isinstance(matrix, SensingMatrix) else np.asarray(matrix, dtype=float)
    S = A[:, list(support)]
    w = np.linalg.eigvalsh(S.T @ S)
    return max(w[-1] - 1.0, 1.0 - w[0], 0.0), float(w[0]), float(w[-1])


def _chunk_extreme(G, supports):
    sub = G[supports[:, :, None], supports[:, None, :]]
    w = np.linalg.eigvalsh(sub)
    dev = np.maximum(w[:, -1] - 1.0, 1.0 - w[:, 0])
    j = int(np.argmax(dev))  # first maximum: lexicographically smallest support in the chunk
    return float(dev[j]), tuple(int(i) for i in supports[j]), (float(w[j, 0]), float(w[j, -1]))


def _chunks(n, s):
    it = itertools.combinations(range(n), s)
    while True:
        block = list(itertools.islice(it, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def rip_bruteforce(matrix: SensingMatrix, max_order: int, workers: int = 1, limit: int = MAX_ENUM_SUPPORTS) -> RipReport:
    """Exact delta_s for s = 1..max_order by enumerating every support.

    Raises EnumerationTooLargeError when n > 32 or the total number of
    supports exceeds ``limit``. The result does not depend on ``workers``:
    chunks are merged in enumeration order, keeping the first maximum.
    """
    n = matrix.n
    if max_order < 1:
        raise InvalidParametersError("max_order must be positive")
    max_order = min(max_order, n)
    count = enumeration_count(n, max_order)
    if n > MAX_ENUM_N or count > limit:
        raise EnumerationTooLargeError(count, limit)
    A = matrix.entries
    G = A.T @ A
    deltas, witnesses, extremes = [], [], []
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for s in range(1, max_order + 1):
            if pool is None:
                parts = (_chunk_extreme(G, c) for c in _chunks(n, s))
            else:
                parts = pool.map(lambda c: _chunk_extreme(G, c), _chunks(n, s))
            best = None
            for part in parts:
                if best is None or part[0] > best[0]:
                    best = part
            dev, supp, ext = best
            deltas.append(max(dev, 0.0))
            witnesses.append(supp)
            extremes.append(ext)
    finally:
        if pool is not None:
            pool.shutdown()
    # enforce monotonicity only through the data: each delta is an exact max,
    # and every s-support Gram is a principal submatrix of an (s+1)-support Gram.
    return RipReport(tuple(range(1, max_order + 1)), tuple(deltas), tuple(witnesses), tuple(extremes))


def random_lower_bound(matrix: SensingMatrix, s: int, samples: int, seed: int) -> float:
    """Lower bound on delta_s from random s-sparse unit vectors: max | ||Phi x||^2 - 1 |."""
    rng = np.random.default_rng(seed)
    A = matrix.entries
    n = matrix.n
    best = 0.0
    done = 0
    while done < samples:
        b = min(4096, samples - done)
        supp = np.argsort(rng.random((b, n)), axis=1)[:, :s]
        vals = rng.standard_normal((b, s))
        vals /= np.linalg.norm(vals, axis=1, keepdims=True)
        img = np.einsum("mbs,bs->bm", A[:, supp], vals)
        best = max(best, float(np.max(np.abs(np.sum(img * img, axis=1) - 1.0))))
        done += b
    return best


# ---------------------------------------------------------------- conditions


def recovery_threshold(K: int, L: int) -> float:
    if L > 1:
        return math.sqrt(L) / (math.sqrt(K) + 2 * math.sqrt(L))
    return 1.0 / (math.sqrt(K) + 2.0)


def recovery_condition(K: int, L: int, delta_LK: float, delta_K1: float) -> BoundCheck:
    """Exact-recovery condition: delta_LK (L > 1) or delta_{K+1} (L = 1) strictly below its threshold."""
    if K < 1 or L < 1:
        raise InvalidParametersError("K and L must be positive")
    lhs = float(delta_LK if L > 1 else delta_K1)
    rhs = recovery_threshold(K, L)
    name = "recovery_condition_L>1" if L > 1 else "recovery_condition_L=1"
    return BoundCheck(name, lhs, rhs, lhs < rhs, True)


def recovery_condition_from(rip: RipReport, K: int, L: int) -> BoundCheck:
    if L > 1:
        return recovery_condition(K, L, rip.constant(L * K), math.nan)
    return recovery_condition(K, L, math.nan, rip.constant(K + 1))


def _deltas(rip: RipReport, *orders):
    d = [rip.constant(s) for s in orders]
    return d, all(x < 1.0 for x in d)


def alpha(k: int, L: int, K: int, rip: RipReport) -> tuple[float, bool]:
    """Per-iteration decay factor alpha(k, L) and whether it is a usable rate."""
    (dLk, dLk1, dL, dKLk), ok = _deltas(rip, L * k, L * k + 1, L, K + L * k)
    num = L * (1 - dLk - dLk1**2) * (1 - dKLk) ** 2
    den = K * (1 + dL) * (1 - dLk) * (1 + dKLk)
    if not ok or den <= 0 or 1 - dLk - dLk1**2 <= 0:
        return math.nan, False
    a = 1 - num / den
    return a, 0 < a < 1


def residual_decay_check(result: RecoveryResult, rip: RipReport, K: int, L: int) -> list[BoundCheck]:
    """||r^{k+1}||^2 <= alpha(k, L)^{k+1} ||y||^2 for every recorded iteration k < K."""
    norms = result.residual_norms
    y2 = norms[0] ** 2
    out = []
    for k in range(min(result.iterations, K)):
        a, ok = alpha(k, L, K, rip)
        lhs = float(norms[k + 1] ** 2)
        rhs = a ** (k + 1) * y2 if ok else math.nan
        out.append(BoundCheck(f"residual_decay[k={k}]", lhs, rhs, ok and _leq(lhs, rhs, y2), ok))
    return out


# ---------------------------------------------------------------- probes


@dataclass(frozen=True)
class IterationState:
    """What the per-iteration bounds need to know about iteration k + 1."""

    k: int
    L: int
    K: int
    ell: int  # |T cap T^k|
    x_rest_norm: float  # ||x_{T \ T^k}||
    noise_norm: float = 0.0
    unit_columns: bool = True


def _beta(dLk, dLk1):
    den = 1 - dLk - dLk1**2
    return math.sqrt(1 + dLk1**2 / den) if den > 0 else math.nan


def iteration_bound_check(probes, state: IterationState, rip: RipReport, noisy: bool = False) -> list[BoundCheck]:
    """Lower bound on u1 and upper bound on vL at one iteration.

    The bounds assume every earlier iteration picked a true index
    (ell >= k), that some true index is still missing (ell < K) and unit-norm
    columns. ``noisy`` selects the forms carrying ||v||.
    """
    u1, vL = probes
    k, L, K, ell = state.k, state.L, state.K, state.ell
    suffix = "_noisy" if noisy else ""
    structural = state.unit_columns and ell >= k and ell < K
    if not structural:
        return [
            BoundCheck("u1_lower" + suffix, u1, math.nan, False, False),
            BoundCheck("vL_upper" + suffix, vL, math.nan, False, False),
        ]
    (d_u, d_a, d_b, d_c, dLk, dLk1), ok = _deltas(
        rip, K + L * k - ell, L + K - ell, L + L * k, L * k + K - ell, L * k, L * k + 1
    )
    beta = _beta(dLk, dLk1)
    ok = ok and 1 - dLk > 0 and not math.isnan(beta)
    xr, v = state.x_rest_norm, state.noise_norm if noisy else 0.0
    if noisy:
        u_rhs = ((1 - d_u) * xr - math.sqrt(1 + d_u) * v) / math.sqrt(K - ell)
    else:
        u_rhs = (1 - d_u) * xr / math.sqrt(K - ell)
    corr = d_a + (d_b * d_c / (1 - dLk) if 1 - dLk > 0 else math.nan)
    if noisy:
        v_rhs = (corr * xr + math.sqrt(1 + d_b) * v) * beta / math.sqrt(L)
    else:
        v_rhs = beta * corr * xr / math.sqrt(L)
    scale = max(xr, v, 1e-300)
    return [
        BoundCheck("u1_lower" + suffix, u1, u_rhs, ok and _leq(u_rhs, u1, scale), ok),
        BoundCheck("vL_upper" + suffix, vL, v_rhs, ok and _leq(vL, v_rhs, scale), ok),
    ]


@dataclass(frozen=True)
class ProbeRecord:
    probes: Optional[tuple[float, float]]
    state: IterationState
    selected: tuple[int, ...]


def collect_probes(instance: ProblemInstance, params) -> tuple[RecoveryResult, list[ProbeRecord]]:
    """Run MOLS and record (u1, vL) plus bound metadata before every selection."""
    truth = instance.truth
    if truth is None:
        raise InvalidParametersError("probes need the ground truth")
    unit = bool(np.allclose(instance.matrix.column_norms(), 1.0, rtol=0, atol=1e-12))
    noise = 0.0 if instance.noise is None else float(np.linalg.norm(instance.noise))
    xd = truth.to_dense()
    true_set = set(int(i) for i in truth.support)
    pending = []

    def observer(k, state, pn):
        probes = iteration_probes(instance.matrix, state.residual, state.basis, pn, truth, params.L)
        chosen = set(state.support)
        missing = sorted(true_set - chosen)
        st = IterationState(
            k, params.L, params.K, len(true_set & chosen), float(np.linalg.norm(xd[missing])), noise, unit
        )
        pending.append((probes, st))

    result = mols(instance, params, observer)
    records = [
        ProbeRecord(p, st, result.trace[i].selected if i < len(result.trace) else ())
        for i, (p, st) in enumerate(pending)
    ]
    return result, records


def probe_orders(K: int, L: int, iterations: int) -> int:
    """Largest isometry order any per-iteration bound can ask for."""
    k = max(iterations - 1, 0)
    return max(L + L * k, L * k + 1, K + L * k, L + K)


# ---------------------------------------------------------------- noisy guarantees


def snr_threshold(K: int, L: int, kappa: float, rip: RipReport) -> tuple[float, bool]:
    """Right-hand side of the sqrt(snr) condition, and whether it is finite and positive."""
    if L == 1:
        d = rip.constant(K + 1)
        den = kappa * (1 - (math.sqrt(K) + 2) * d)
        num = 2 * (1 + d) * math.sqrt(K)
    else:
        d = rip.constant(L * K)
        den = kappa * (math.sqrt(L) - (math.sqrt(K) + 2 * math.sqrt(L)) * d)
        num = (math.sqrt(L) + 1) * (1 + d) * math.sqrt(K)
    if d >= 1 or den <= 0:
        return math.nan, False
    return num / den, True


def early_stop_bound(eps: float, noise_norm: float, l: int, K: int, L: int, rip: RipReport) -> tuple[float, bool]:
    """Distortion bound when the residual drops below eps after l < K iterations."""
    (d2K, dLl), ok = _deltas(rip, 2 * K, L * l + K)
    if not ok:
        return math.nan, False
    a, b = math.sqrt(1 - d2K), math.sqrt(1 - dLl)
    return (2 * eps * a + 2 * (a + b) * noise_norm) / math.sqrt((1 - dLl) * (1 + d2K)), True


def full_run_bound(noise_norm: float, K: int, L: int, rip: RipReport) -> tuple[float, bool]:
    """Distortion bound once the first K iterations caught the whole support."""
    if L == 1:
        (dK,), ok = _deltas(rip, K)
        return (noise_norm / math.sqrt(1 - dK), True) if ok else (math.nan, False)
    (d2K, dLK), ok = _deltas(rip, 2 * K, L * K)
    if not ok:
        return math.nan, False
    return (1 + math.sqrt((1 - d2K) / (1 - dLK))) * 2 * noise_norm / math.sqrt(1 + d2K), True


def noisy_guarantee_check(
    result: RecoveryResult, instance: ProblemInstance, rip: RipReport, K: int, L: int, epsilon: float
) -> list[BoundCheck]:
    if instance.truth is None:
        raise InvalidParametersError("noisy checks need the ground truth")
    truth = instance.truth
    v = 0.0 if instance.noise is None else float(np.linalg.norm(instance.noise))
    err = float(np.linalg.norm(result.x_hat - truth.to_dense()))
    scale = max(float(np.linalg.norm(truth.values)), 1e-300)
    out = []

    l = result.iterations
    if result.termination is Termination.RESIDUAL_BELOW_EPSILON and l < K:
        b, ok = early_stop_bound(epsilon, v, l, K, L, rip)
        out.append(BoundCheck("early_stop_distortion", err, b, ok and _leq(err, b, scale), ok))
    else:
        out.append(BoundCheck("early_stop_distortion", err, math.nan, False, False))

    premise = recovery_condition_from(rip, K, L)
    snr, kappa = snr_and_mar(instance)
    thr, ok = snr_threshold(K, L, kappa, rip)
    ok = ok and premise.satisfied
    root = math.sqrt(snr)
    snr_ok = ok and root >= thr
    out.append(BoundCheck("snr_condition", root, thr, snr_ok, ok))

    ran_k = result.iterations >= K and not result.failed
    if snr_ok and ran_k:
        tk = set(result.trace[K - 1].support)
        missing = len(set(int(i) for i in truth.support) - tk)
        out.append(BoundCheck("support_inclusion", float(missing), 0.0, missing == 0, True))
        b, bok = full_run_bound(v, K, L, rip)
        out.append(BoundCheck("full_run_distortion", err, b, bok and _leq(err, b, scale), bok))
    else:
        out.append(BoundCheck("support_inclusion", math.nan, 0.0, False, False))
        out.append(BoundCheck("full_run_distortion", err, math.nan, False, False))
    return out


def counterexample_instance(m: int, K: int) -> ProblemInstance:
    """Identity sensing, all-ones K-sparse signal and a unit noise spike on the last row.

    Here delta_{K+1} = 0 and snr = K, yet the first selection is a tie
    between the true indices and the noise spike.
    """
    if not 1 <= K < m:
        raise InvalidParametersError("need 1 <= K < m")
    x = SparseSignal(m, np.arange(K), np.ones(K))
    v = np.zeros(m)
    v[-1] = 1.0
    A = SensingMatrix(np.eye(m), normalized=True)
    return ProblemInstance(A, A.apply(x) + v, x, v)


# ---------------------------------------------------------------- lemma properties


def scalar_f(d):
    return (1 - d) ** 1.5 * np.sqrt(1 - d - d * d) / d


def scalar_g(d):
    return 1 / d - 2


def scalar_gap_check(points: int = 10001) -> BoundCheck:
    """f > g on a grid inside (0, (sqrt 5 - 1)/2); lhs is the smallest gap f - g."""
    hi = (math.sqrt(5) - 1) / 2
    d = np.linspace(0, hi, points + 2)[1:-1]
    gap = float(np.min(scalar_f(d) - scalar_g(d)))
    return BoundCheck("scalar_f_gt_g", gap, 0.0, gap > 0, True)


def lemma_checks(matrix: SensingMatrix, rip: RipReport, seed: int, samples: int = 200, supports: int = 20) -> list[BoundCheck]:
    """Randomized checks of the isometry lemmas against exact constants.

    Each returned check aggregates all samples: lhs is the worst observed
    margin (must be <= 0 up to rounding), rhs = 0.
    """
    rng = np.random.default_rng(seed)
    A = matrix.entries
    n = matrix.n
    top = max(rip.orders)
    out = []

    d = np.array(rip.delta)
    mono = float(np.max(np.diff(d))) if d.size > 1 else 0.0
    out.append(BoundCheck("lemma_monotone", -mono, 0.0, mono >= -1e-12, True))

    def rand_support(s):
        return np.sort(rng.choice(n, size=s, replace=False))

    # consequences of RIP, using the exact per-support deviation
    worst = -np.inf
    for _ in range(supports):
        s = int(rng.integers(1, top + 1))
        S = rand_support(s)
        dev, _, _ = support_deviation(matrix, S)
        G = A[:, S].T @ A[:, S]
        u = rng.standard_normal((s, samples))
        nu = np.linalg.norm(u, axis=0)
        gu = np.linalg.norm(G @ u, axis=0)
        worst = max(worst, float(np.max((1 - dev) * nu - gu)), float(np.max(gu - (1 + dev) * nu)))
        if dev < 1:
            ginv = np.linalg.norm(np.linalg.solve(G, u), axis=0)
            worst = max(worst, float(np.max(nu / (1 + dev) - ginv)), float(np.max(ginv - nu / (1 - dev))))
    out.append(BoundCheck("lemma_rip_consequences", worst, 0.0, worst <= 1e-10, True))

    # cross-correlation of disjoint supports
    worst, ok_any = -np.inf, False
    for _ in range(supports):
        s = int(rng.integers(2, top + 1)) if top >= 2 else 2
        if s > n or top < 2:
            break
        S = rand_support(s)
        s1 = int(rng.integers(1, s))
        S1, S2 = S[:s1], S[s1:]
        dlt = rip.constant(s)
        if dlt >= 1:
            continue
        ok_any = True
        vv = rng.standard_normal((S2.size, samples))
        lhs = np.linalg.norm(A[:, S1].T @ (A[:, S2] @ vv), axis=0)
        worst = max(worst, float(np.max(lhs - dlt * np.linalg.norm(vv, axis=0))))
    out.append(BoundCheck("lemma_disjoint_correlation", worst, 0.0, ok_any and worst <= 1e-10, ok_any))

    # ||Phi_S' u|| <= sqrt(1 + delta) ||u||
    worst = -np.inf
    for _ in range(supports):
        s = int(rng.integers(1, top + 1))
        S = rand_support(s)
        u = rng.standard_normal((matrix.m, samples))
        lhs = np.linalg.norm(A[:, S].T @ u, axis=0)
        worst = max(worst, float(np.max(lhs - math.sqrt(1 + rip.constant(s)) * np.linalg.norm(u, axis=0))))
    out.append(BoundCheck("lemma_adjoint_norm", worst, 0.0, worst <= 1e-10, True))

    # eigenvalues of Phi_S1' P_perp_S2 Phi_S1 lie inside those of the union Gram
    worst = -np.inf
    for _ in range(supports):
        s = int(rng.integers(2, top + 1)) if top >= 2 else 2
        if top < 2 or s > min(n, matrix.m):
            break
        S = rand_support(s)
        s1 = int(rng.integers(1, s))
        S1, S2 = S[:s1], S[s1:]
        Q, _ = np.linalg.qr(A[:, S2])
        B = A[:, S1] - Q @ (Q.T @ A[:, S1])
        wp = np.linalg.eigvalsh(B.T @ B)
        wu = np.linalg.eigvalsh(A[:, S].T @ A[:, S])
        worst = max(worst, float(wu[0] - wp[0]), float(wp[-1] - wu[-1]))
    out.append(BoundCheck("lemma_projected_eigenvalues", worst, 0.0, worst <= 1e-10, True))

    # pseudo-inverse adjoint: ||u|| / sqrt(1 + delta) <= ||(Phi_S^+)' u|| <= ||u|| / sqrt(1 - delta)
    worst = -np.inf
    for _ in range(supports):
        s = int(rng.integers(1, top + 1))
        S = rand_support(s)
        dlt = rip.constant(s)
        if dlt >= 1:
            continue
        P = np.linalg.pinv(A[:, S])
        u = rng.standard_normal((s, samples))
        nu = np.linalg.norm(u, axis=0)
        pu = np.linalg.norm(P.T @ u, axis=0)
        worst = max(worst, float(np.max(nu / math.sqrt(1 + dlt) - pu)), float(np.max(pu - nu / math.sqrt(1 - dlt))))
    out.append(BoundCheck("lemma_pinv_adjoint", worst, 0.0, worst <= 1e-10, True))
    return out


# ---------------------------------------------------------------- matrix design


def design_low_rip_matrix(m: int, n: int, order: int, seed: int, restarts: int = 3, maxiter: int = 500) -> SensingMatrix:
    """Unit-norm m x n matrix with a small delta_order, found by local optimization.

    Minimizes a log-sum-exp smoothing of max_S max(lambda_max - 1, 1 - lambda_min)
    over all supports of size ``order`` with L-BFGS, sharpening the smoothing
    in stages, and keeps the best of ``restarts`` random starts.
    """
    from scipy.optimize import minimize

    combos = np.array(list(itertools.combinations(range(n), order)), dtype=np.intp)
    if combos.shape[0] > 200000:
        raise EnumerationTooLargeError(int(combos.shape[0]), 200000)
    C = combos.shape[0]

    def grams(P):
        nr = np.linalg.norm(P, axis=0)
        Pn = P / nr
        B = Pn[:, combos].transpose(1, 2, 0)
        return nr, Pn, B, np.einsum("csm,ctm->cst", B, B)

    def objective(z, beta):
        P = z.reshape(m, n)
        nr, Pn, B, G = grams(P)
        w, V = np.linalg.eigh(G)
        dv = np.concatenate([w[:, -1] - 1, 1 - w[:, 0]])
        top = dv.max()
        e = np.exp(beta * (dv - top))
        f = top + math.log(e.sum()) / beta
        p = e / e.sum()
        vt, vb = V[:, :, -1], V[:, :, 0]
        dG = p[:C, None, None] * np.einsum("cs,ct->cst", vt, vt) - p[C:, None, None] * np.einsum("cs,ct->cst", vb, vb)
        dB = 2 * np.einsum("cst,ctm->csm", dG, B)
        dPn = np.zeros((n, m))
        np.add.at(dPn, combos, dB)
        dPn = dPn.T
        dP = (dPn - Pn * (Pn * dPn).sum(0)) / nr
        return f, dP.ravel()

    def exact(P):
        _, _, _, G = grams(P)
        w = np.linalg.eigvalsh(G)
        return max(float(w[:, -1].max() - 1), float(1 - w[:, 0].min()))

    rng = np.random.default_rng(seed)
    best, best_val = None, math.inf
    for _ in range(restarts):
        z = rng.standard_normal(m * n)
        for beta in (10, 30, 100, 300, 1000):
            z = minimize(objective, z, args=(beta,), jac=True, method="L-BFGS-B", options={"maxiter": maxiter}).x
        val = exact(z.reshape(m, n))
        if val < best_val:
            best, best_val = z.reshape(m, n), val
    return SensingMatrix(best / np.linalg.norm(best, axis=0), normalized=True)

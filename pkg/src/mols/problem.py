"""Problem model: sparse signals, sensing matrices and measurement instances.

All random objects are pure functions of an integer seed. Monte-Carlo code
derives per-trial seeds with :func:`child_seed` so that results never depend
on how trials are scheduled.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParametersError, InvalidSparsityError, MissingGroundTruthError

NORMALIZATION_RTOL = 1e-12


class _Noiseless:
    """Sentinel for an infinite SNR (no noise is added)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NOISELESS"

    def __reduce__(self):
        return (_Noiseless, ())


NOISELESS = _Noiseless()


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def child_seed(master_seed: int, *keys: int) -> int:
    """Derive a 64-bit seed from ``master_seed`` and a path of integer keys."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


@dataclass(frozen=True)
class SparseSignal:
    """A vector of length ``n`` given by its (sorted) support and nonzero values."""

    n: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.intp).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.n < 1:
            raise InvalidSparsityError("ambient dimension must be positive")
        if support.size < 1 or support.size > self.n:
            raise InvalidSparsityError(f"support size {support.size} not in [1, {self.n}]")
        if support.size != values.size:
            raise InvalidSparsityError("support and values differ in length")
        if np.any(np.diff(support) <= 0):
            raise InvalidSparsityError("support indices must be strictly increasing")
        if support[0] < 0 or support[-1] >= self.n:
            raise InvalidSparsityError(f"support index out of range [0, {self.n})")
        if np.any(values == 0):
            raise InvalidSparsityError("stored values must be nonzero")
        object.__setattr__(self, "support", _frozen(support, np.intp))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def K(self) -> int:
        return int(self.support.size)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x, dtype=float)
        idx = np.flatnonzero(x)
        return cls(x.size, idx, x[idx])

    def __eq__(self, other):
        if not isinstance(other, SparseSignal):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        a = np.asfortranarray(np.array(self.entries, dtype=float, copy=True))
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidParametersError("sensing matrix must be a nonempty 2-D array")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if self.normalized:
            norms = np.linalg.norm(a, axis=0)
            if np.any(np.abs(norms - 1.0) > NORMALIZATION_RTOL):
                raise InvalidParametersError("matrix flagged normalized but a column norm differs from 1")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=0)

    def columns(self, idx) -> np.ndarray:
        return self.entries[:, np.asarray(idx, dtype=np.intp)]

    def apply(self, signal: SparseSignal) -> np.ndarray:
        """Return Phi @ x, touching only the support columns."""
        if signal.n != self.n:
            raise InvalidParametersError(f"signal length {signal.n} != matrix columns {self.n}")
        return self.entries[:, signal.support] @ signal.values

    def normalize(self) -> "SensingMatrix":
        return SensingMatrix(self.entries / self.column_norms(), normalized=True)

    def scaled_columns(self, scale) -> "SensingMatrix":
        scale = np.asarray(scale, dtype=float)
        return SensingMatrix(self.entries * scale, normalized=False)

    def __eq__(self, other):
        if not isinstance(other, SensingMatrix):
            return NotImplemented
        return self.normalized == other.normalized and np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True)
class ProblemInstance:
    """Measurements ``y`` of a sensing matrix, optionally with ground truth and noise."""

    matrix: SensingMatrix
    y: np.ndarray
    truth: Optional[SparseSignal] = None
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        y = _frozen(np.asarray(self.y, dtype=float).reshape(-1))
        if y.size != self.matrix.m:
            raise InvalidParametersError(f"y has length {y.size}, matrix has {self.matrix.m} rows")
        object.__setattr__(self, "y", y)
        if self.truth is not None and self.truth.n != self.matrix.n:
            raise InvalidParametersError("ground-truth length does not match matrix columns")
        if self.noise is not None:
            v = _frozen(np.asarray(self.noise, dtype=float).reshape(-1))
            if v.size != self.matrix.m:
                raise InvalidParametersError("noise length does not match matrix rows")
            object.__setattr__(self, "noise", v)

    @classmethod
    def noiseless(cls, matrix: SensingMatrix, truth: SparseSignal) -> "ProblemInstance":
        return cls(matrix, matrix.apply(truth), truth, None)

    @property
    def m(self) -> int:
        return self.matrix.m

    @property
    def n(self) -> int:
        return self.matrix.n

    def fingerprint(self) -> str:
        """Short content hash, logged to prove that paired trials shared an instance."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.matrix.entries).tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class AlgorithmParams:
    """Solver parameters. ``epsilon=None`` means 1e-6 * ||y||_2.

    ``bounded_selection`` enforces L <= floor(m/K) at solver entry. The
    published Monte-Carlo protocol runs L = 5 up to K = 64 with m = 128, which
    violates that bound, so sweeps reproducing it switch the check off.
    """

    K: int
    L: int = 1
    epsilon: Optional[float] = None
    max_iterations: Optional[int] = None
    bounded_selection: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise InvalidParametersError("K must be positive")
        if self.L < 1:
            raise InvalidParametersError("L must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise InvalidParametersError("epsilon must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidParametersError("max_iterations must be positive")

    def validate_for(self, m: int) -> None:
        if self.K > m:
            raise InvalidParametersError(f"K={self.K} exceeds m={m}")
        if self.L > self.K or (self.bounded_selection and self.L > m // self.K):
            raise InvalidParametersError(
                f"L={self.L} violates L <= min(K, floor(m/K)) = {min(self.K, m // self.K)}"
            )

    def epsilon_for(self, y) -> float:
        if self.epsilon is None:
            return 1e-6 * float(np.linalg.norm(y))
        return float(self.epsilon)


def generate_gaussian_matrix(m: int, n: int, seed: int, normalize: bool = True) -> SensingMatrix:
    """i.i.d. N(0, 1/m) entries; optionally rescale columns to unit norm."""
    if m < 1 or n < 1:
        raise InvalidParametersError("matrix dimensions must be positive")
    rng = make_rng(seed)
    a = rng.standard_normal((m, n)) / math.sqrt(m)
    if normalize:
        a = a / np.linalg.norm(a, axis=0)
    return SensingMatrix(a, normalized=normalize)


def generate_sparse_signal(n: int, K: int, kind: str, seed: int) -> SparseSignal:
    """Uniformly random support of size K with standard-normal or +/-1 values."""
    if not 1 <= K <= n:
        raise InvalidSparsityError(f"K={K} must satisfy 1 <= K <= n={n}")
    rng = make_rng(seed)
    support = rng.choice(n, size=K, replace=False)
    if kind == "gaussian":
        values = rng.standard_normal(K)
        while np.any(values == 0):  # probability zero, but the invariant is strict
            values[values == 0] = rng.standard_normal(int(np.sum(values == 0)))
    elif kind == "pam2":
        values = rng.choice(np.array([-1.0, 1.0]), size=K)
    else:
        raise InvalidParametersError(f"unknown signal kind {kind!r}")
    order = np.argsort(support)
    return SparseSignal(n, support[order], values[order])


def noise_variance(K: int, m: int, snr_db: float) -> float:
    return K / m * 10.0 ** (-snr_db / 10.0)


def add_noise(instance: ProblemInstance, snr_db, seed: int) -> ProblemInstance:
    """Replace ``y`` by Phi x + v with v_i ~ N(0, (K/m) 10^(-SNR/10)).

    ``snr_db`` may be :data:`NOISELESS`, in which case v = 0.
    """
    if instance.truth is None:
        raise MissingGroundTruthError("add_noise needs the ground-truth signal")
    m = instance.m
    if snr_db is NOISELESS:
        v = np.zeros(m)
    else:
        snr_db = float(snr_db)
        if not math.isfinite(snr_db):
            raise InvalidParametersError("use NOISELESS instead of a non-finite SNR")
        rng = make_rng(seed)
        v = math.sqrt(noise_variance(instance.truth.K, m, snr_db)) * rng.standard_normal(m)
    y = instance.matrix.apply(instance.truth) + v
    return ProblemInstance(instance.matrix, y, instance.truth, v)


def snr_and_mar(instance: ProblemInstance) -> tuple[float, float]:
    """Return (snr, mar): ||Phi x||^2/||v||^2 and min|x_j| / (||x|| / sqrt(K)).

    An all-zero (or absent) noise vector gives snr = inf.
    """
    if instance.truth is None:
        raise MissingGroundTruthError("snr/mar need the ground-truth signal")
    x = instance.truth
    signal_power = float(np.sum(instance.matrix.apply(x) ** 2))
    noise_power = 0.0 if instance.noise is None else float(np.sum(instance.noise**2))
    snr = math.inf if noise_power == 0.0 else signal_power / noise_power
    mar = float(np.min(np.abs(x.values)) / (np.linalg.norm(x.values) / math.sqrt(x.K)))
    return snr, mar

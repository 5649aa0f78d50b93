"""Monte-Carlo sweeps: exact-recovery frequency, MSE and iteration counts.

Every trial draws a fresh matrix, signal and noise from seeds derived from
(master_seed, value index, trial index), and every algorithm runs on that same
instance. Per-trial outcomes are stored by trial index and reduced in that
order, so the table does not depend on the number of workers.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .baselines import cosamp, irls, oracle_ls
from .errors import FileFormatError, InvalidParametersError, MolsError, UnknownAlgorithmError
from .problem import (
    NOISELESS,
    AlgorithmParams,
    ProblemInstance,
    add_noise,
    child_seed,
    generate_gaussian_matrix,
    generate_sparse_signal,
)
from .solvers import mols, ols, omp

SWEEP_VARIABLES = ("K", "m", "snr_db")
CSV_COLUMNS = (
    "algorithm",
    "sweep_variable",
    "sweep_value",
    "trials",
    "frequency_exact",
    "mean_mse",
    "mean_iterations",
    "failures",
)
ALGORITHMS = ("mols", "ols", "omp", "cosamp", "irls", "oracle_ls")


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm column of a sweep.

    ``epsilon=None`` keeps each algorithm's default stopping policy: OLS and
    OMP run exactly K iterations, MOLS stops on the residual threshold
    1e-6 ||y||, CoSaMP caps at 50 iterations.
    """

    name: str
    L: int = 1
    epsilon: Optional[float] = None
    bounded_selection: bool = False

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise UnknownAlgorithmError(self.name)
        if self.L < 1:
            raise InvalidParametersError("L must be positive")

    @property
    def label(self) -> str:
        if self.name == "mols":
            return f"mols:L={self.L}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        """Parse ``name[:key=value[,key=value]]``, e.g. ``mols:L=5`` or ``cosamp:eps=1e-3``."""
        name, _, rest = text.strip().partition(":")
        kw = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, val = item.partition("=")
            if not sep:
                raise InvalidParametersError(f"bad algorithm option {item!r}")
            key = key.strip()
            if key == "L":
                kw["L"] = int(val)
            elif key in ("eps", "epsilon"):
                kw["epsilon"] = float(val)
            elif key == "bounded":
                kw["bounded_selection"] = val.strip().lower() in ("1", "true", "yes")
            else:
                raise InvalidParametersError(f"unknown algorithm option {key!r}")
        return cls(name.strip(), **kw)

    def params(self, K: int) -> AlgorithmParams:
        eps = self.epsilon
        if eps is None and self.name in ("ols", "omp"):
            eps = 0.0
        L = self.L if self.name == "mols" else 1
        return AlgorithmParams(K=K, L=L, epsilon=eps, bounded_selection=self.bounded_selection)

    def admissible(self, K: int, m: int) -> bool:
        if K > m:
            return False
        if self.name == "mols":
            if self.L > K:
                return False
            if self.bounded_selection and self.L > m // K:
                return False
        return True

    def run(self, instance: ProblemInstance, K: int):
        p = self.params(K)
        if self.name == "mols":
            return mols(instance, p)
        if self.name == "ols":
            return ols(instance, p)
        if self.name == "omp":
            return omp(instance, p)
        if self.name == "cosamp":
            return cosamp(instance, p)
        if self.name == "irls":
            return irls(instance, p)
        return oracle_ls(instance, p)


@dataclass(frozen=True)
class SweepSpec:
    m: int
    n: int
    sweep_variable: str
    sweep_values: tuple
    trials: int
    signal_kind: str
    algorithms: tuple[AlgorithmSpec, ...]
    master_seed: int
    exact_tol: float = 1e-6
    K: Optional[int] = None  # fixed sparsity when sweeping m or snr_db
    snr_db: object = NOISELESS  # fixed SNR when sweeping K or m

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise InvalidParametersError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        vals = tuple(self.sweep_values)
        if not vals:
            raise InvalidParametersError("sweep_values is empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidParametersError("sweep_values must be strictly increasing")
        object.__setattr__(self, "sweep_values", vals)
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials < 1:
            raise InvalidParametersError("trials must be >= 1")
        if self.signal_kind not in ("gaussian", "pam2"):
            raise InvalidParametersError("signal_kind must be gaussian or pam2")
        if not self.algorithms:
            raise InvalidParametersError("no algorithms given")
        if len({a.label for a in self.algorithms}) != len(self.algorithms):
            raise InvalidParametersError("duplicate algorithm labels")
        if self.sweep_variable != "K" and self.K is None:
            raise InvalidParametersError("K must be fixed when sweeping m or snr_db")
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidParametersError("master_seed must be a 64-bit unsigned integer")

    def point(self, value):
        """(m, K, snr_db) at one sweep value."""
        m, K, snr = self.m, self.K, self.snr_db
        if self.sweep_variable == "K":
            K = int(value)
        elif self.sweep_variable == "m":
            m = int(value)
        else:
            snr = float(value)
        return m, K, snr

    def digest(self) -> str:
        doc = {
            "m": self.m,
            "n": self.n,
            "var": self.sweep_variable,
            "values": [repr(v) for v in self.sweep_values],
            "trials": self.trials,
            "kind": self.signal_kind,
            "algs": [[a.name, a.L, repr(a.epsilon), a.bounded_selection] for a in self.algorithms],
            "seed": int(self.master_seed),
            "tol": repr(self.exact_tol),
            "K": self.K,
            "snr": repr(self.snr_db),
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    sweep_variable: str
    sweep_value: float
    trials: int
    frequency_exact: float
    mean_mse: float
    mean_iterations: float
    failures: int
    skipped: bool = False
    seed_range: tuple = ()


@dataclass
class SweepTable:
    rows: list[SweepRow]
    seed: Optional[int] = None
    spec_hash: str = ""
    fingerprints: dict = field(default_factory=dict)  # (value index, trial) -> instance hash

    def algorithms(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.algorithm not in seen:
                seen.append(r.algorithm)
        return seen

    def series(self, algorithm: str) -> list[SweepRow]:
        rows = [r for r in self.rows if r.algorithm == algorithm]
        if not rows:
            raise UnknownAlgorithmError(algorithm)
        return rows

    def row(self, algorithm: str, value) -> SweepRow:
        for r in self.series(algorithm):
            if r.sweep_value == value:
                return r
        raise KeyError((algorithm, value))

    def merge(self, other: "SweepTable") -> "SweepTable":
        """Append rows of algorithms not present here (e.g. results computed elsewhere)."""
        mine = set(self.algorithms())
        extra = [r for r in other.rows if r.algorithm not in mine]
        return SweepTable(self.rows + extra, self.seed, self.spec_hash, dict(self.fingerprints))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# tool-version={__version__}, seed={self.seed}, spec-hash={self.spec_hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in sorted(self.rows, key=lambda r: (r.algorithm, r.sweep_value)):
            w.writerow(
                [
                    r.algorithm,
                    r.sweep_variable,
                    _fmt(r.sweep_value),
                    r.trials,
                    _fmt(r.frequency_exact),
                    _fmt(r.mean_mse),
                    _fmt(r.mean_iterations),
                    r.failures,
                ]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "SweepTable":
        """Load a table in the CSV schema above (comment lines are skipped)."""
        rows = []
        header = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                fields = next(csv.reader([line]))
                if header is None:
                    if tuple(fields) != CSV_COLUMNS:
                        raise FileFormatError(path, lineno, "unexpected header")
                    header = fields
                    continue
                if len(fields) != len(CSV_COLUMNS):
                    raise FileFormatError(path, lineno, f"expected {len(CSV_COLUMNS)} fields, got {len(fields)}")
                try:
                    rows.append(
                        SweepRow(
                            fields[0],
                            fields[1],
                            float(fields[2]),
                            int(fields[3]),
                            float(fields[4]),
                            float(fields[5]),
                            float(fields[6]),
                            int(fields[7]),
                            skipped=int(fields[3]) == 0,
                        )
                    )
                except ValueError as exc:
                    raise FileFormatError(path, lineno, str(exc)) from None
        if header is None:
            raise FileFormatError(path, 1, "missing header")
        return cls(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if x == int(x) and abs(x) < 1e15:
            return str(int(x))
        return repr(x)
    return str(x)


@dataclass(frozen=True)
class TrialOutcome:
    exact: bool
    mse: float
    iterations: int
    failed: bool


def trial_instance(spec: SweepSpec, vi: int, t: int) -> ProblemInstance:
    m, K, snr = spec.point(spec.sweep_values[vi])
    A = generate_gaussian_matrix(m, spec.n, child_seed(spec.master_seed, vi, t, 0))
    x = generate_sparse_signal(spec.n, K, spec.signal_kind, child_seed(spec.master_seed, vi, t, 1))
    inst = ProblemInstance.noiseless(A, x)
    if snr is not NOISELESS:
        inst = add_noise(inst, snr, child_seed(spec.master_seed, vi, t, 2))
    return inst


def run_trial(spec: SweepSpec, vi: int, t: int, active):
    inst = trial_instance(spec, vi, t)
    K = inst.truth.K
    x = inst.truth.to_dense()
    xnorm = float(np.linalg.norm(x))
    out = []
    for alg in active:
        try:
            res = alg.run(inst, K)
        except MolsError:
            out.append(TrialOutcome(False, math.nan, 0, True))
            continue
        err = x - res.x_hat
        exact = bool(np.linalg.norm(err) <= spec.exact_tol * xnorm)
        out.append(TrialOutcome(exact, float(np.mean(err * err)), res.iterations, res.failed))
    return inst.fingerprint(), out


def run_sweep(spec: SweepSpec, workers: int = 1, log=None) -> SweepTable:
    """Run every (algorithm, sweep value) cell; inadmissible cells become skipped rows."""
    rows = []
    prints = {}
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for vi, value in enumerate(spec.sweep_values):
            m, K, _ = spec.point(value)
            active = [a for a in spec.algorithms if K <= spec.n and a.admissible(K, m)]
            results = [None] * spec.trials
            if active:
                if pool is None:
                    it = (run_trial(spec, vi, t, active) for t in range(spec.trials))
                else:
                    it = pool.map(lambda t: run_trial(spec, vi, t, active), range(spec.trials))
                for t, r in enumerate(it):
                    results[t] = r
            for t, r in enumerate(results):
                if r is not None:
                    prints[(vi, t)] = r[0]
            seed_range = (child_seed(spec.master_seed, vi, 0, 0), spec.trials)
            for alg in spec.algorithms:
                if alg not in active:
                    rows.append(
                        SweepRow(alg.label, spec.sweep_variable, float(value), 0, math.nan, math.nan, math.nan, 0, True, seed_range)
                    )
                    continue
                j = active.index(alg)
                outs = [results[t][1][j] for t in range(spec.trials)]
                exact = sum(o.exact for o in outs)
                mses = [o.mse for o in outs if not math.isnan(o.mse)]
                rows.append(
                    SweepRow(
                        alg.label,
                        spec.sweep_variable,
                        float(value),
                        spec.trials,
                        exact / spec.trials,
                        math.fsum(mses) / len(mses) if mses else math.nan,
                        math.fsum(o.iterations for o in outs) / spec.trials,
                        sum(o.failed for o in outs),
                        False,
                        seed_range,
                    )
                )
            if log is not None:
                log(f"{spec.sweep_variable}={_fmt(float(value))} done")
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepTable(rows, int(spec.master_seed), spec.digest(), prints)


def critical_sparsity(table: SweepTable, algorithm: str) -> int:
    """Largest swept K at which every trial was exact (0 if none)."""
    best = 0
    for r in table.series(algorithm):
        if r.sweep_variable != "K":
            raise InvalidParametersError("table was not swept over K")
        if not r.skipped and r.frequency_exact == 1.0:
            best = max(best, int(r.sweep_value))
    return best


def mse_sweep_summary(table: SweepTable, oracle: str = "oracle_ls") -> dict[str, list[tuple[float, float]]]:
    """MSE / oracle MSE per SNR point for every algorithm in the table."""
    ref = {r.sweep_value: r.mean_mse for r in table.series(oracle)}
    out = {}
    for alg in table.algorithms():
        pts = []
        for r in table.series(alg):
            if r.sweep_variable != "snr_db":
                raise InvalidParametersError("table was not swept over snr_db")
            o = ref.get(r.sweep_value)
            pts.append((r.sweep_value, r.mean_mse / o if o else math.nan))
        out[alg] = pts
    return out


def plot_script(csv_path: str, column: str = "frequency_exact", title: str = "") -> str:
    """Self-contained gnuplot script drawing one curve per algorithm from a sweep CSV."""
    idx = CSV_COLUMNS.index(column) + 1
    return "\n".join(
        [
            "set datafile separator ','",
            "set key outside right",
            "set grid",
            f"set title '{title or column}'",
            "set xlabel 'sweep value'",
            f"set ylabel '{column}'",
            f"file = '{csv_path}'",
            f"algs = system(\"grep -v '^#' '\".file.\"' | tail -n +2 | cut -d, -f1 | uniq\")",
            "plot for [a in algs] file using "
            f"(strcol(1) eq a ? $3 : NaN):{idx} with linespoints title a",
            "",
        ]
    )

"""Command-line entry point: ``mols {gen,recover,sweep,rip,verify}``.

Every flag can also come from a ``--config`` file of ``key = value`` lines
(keys are the long flag names, with dashes or underscores). Flags given on the
command line override the file. Exit codes: 0 success, 1 usage or I/O error,
2 solver-flagged failure, 3 resource limit.
"""
from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    collect_probes,
    iteration_bound_check,
    noisy_guarantee_check,
    probe_orders,
    recovery_condition_from,
    residual_decay_check,
    rip_bruteforce,
)
from .errors import EnumerationTooLargeError, FileFormatError, MolsError
from .experiments import AlgorithmSpec, SweepSpec, SweepTable, plot_script, run_sweep
from .io import read_matrix, read_signal, read_vector, write_matrix, write_signal, write_vector
from .problem import (
    NOISELESS,
    AlgorithmParams,
    ProblemInstance,
    add_noise,
    child_seed,
    generate_gaussian_matrix,
    generate_sparse_signal,
)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _header(seed, payload: str) -> str:
    h = hashlib.sha256(payload.encode()).hexdigest()[:16]
    return f"# tool-version={__version__}, seed={seed}, spec-hash={h}\n"


def _emit(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _snr(text):
    t = str(text).strip().lower()
    if t in ("inf", "none", "noiseless"):
        return NOISELESS
    v = float(t)
    if not math.isfinite(v):
        return NOISELESS
    return v


def _values(text: str):
    """``a:b:step`` (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad range {text!r}; use start:stop:step")
        a, b, s = (float(p) for p in parts)
        if s <= 0 or b < a:
            raise UsageError(f"bad range {text!r}")
        count = int(math.floor((b - a) / s + 1e-9)) + 1
        vals = [a + i * s for i in range(count)]
    else:
        vals = [float(v) for v in text.split(",") if v.strip()]
    return [int(v) if v == int(v) else v for v in vals]


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _threads(value: int) -> int:
    return (os.cpu_count() or 1) if value == 0 else value


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="mols", description="Sparse recovery with multiple orthogonal least squares.", formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", default=None, help="key = value file providing defaults for any flag")
        sp.add_argument("--seed", type=_seed, default=0, help="master seed (64-bit unsigned)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (0 = one per CPU)")
        sp.add_argument("-o", "--output", default="-", help="output file ('-' for stdout)")

    g = sub.add_parser("gen", help="generate a random instance", formatter_class=fmt)
    common(g)
    g.add_argument("--m", type=int, default=128, help="number of measurements")
    g.add_argument("--n", type=int, default=256, help="signal length")
    g.add_argument("--K", type=int, default=20, help="sparsity")
    g.add_argument("--signal", choices=("gaussian", "pam2"), default="gaussian", help="nonzero value distribution")
    g.add_argument("--snr", default="inf", help="SNR in dB ('inf' for noiseless)")
    g.add_argument("--out-dir", default=".", help="directory for matrix.txt, signal.txt and y.txt")

    r = sub.add_parser("recover", help="run a solver on an instance read from files", formatter_class=fmt)
    common(r)
    r.add_argument("--matrix", default=None, help="sensing matrix file (required)")
    r.add_argument("--y", default=None, help="measurement vector file (required)")
    r.add_argument("--K", type=int, default=None, help="sparsity (required)")
    r.add_argument("--L", type=int, default=1, help="indices selected per iteration (mols)")
    r.add_argument("--alg", default="mols", choices=("mols", "ols", "omp", "cosamp", "irls"), help="algorithm")
    r.add_argument("--eps", type=float, default=None, help="residual threshold; None means 1e-6 * ||y||")
    r.add_argument("--max-iterations", type=int, default=None, help="iteration cap; None keeps the algorithm's own")
    r.add_argument("--unbounded", action="store_true", default=False, help="allow L > floor(m/K)")

    s = sub.add_parser("sweep", help="Monte-Carlo sweep over K, m or SNR", formatter_class=fmt)
    common(s)
    s.add_argument("--var", choices=("K", "m", "snr_db"), default="K", help="swept variable")
    s.add_argument("--values", default="5:64:1", help="start:stop:step (inclusive) or comma list")
    s.add_argument("--m", type=int, default=128, help="measurements (fixed unless swept)")
    s.add_argument("--n", type=int, default=256, help="signal length")
    s.add_argument("--K", type=int, default=None, help="sparsity (fixed unless swept)")
    s.add_argument("--snr", default="inf", help="SNR in dB unless swept ('inf' for noiseless)")
    s.add_argument("--trials", type=int, default=100, help="trials per sweep value")
    s.add_argument("--signal", choices=("gaussian", "pam2"), default="gaussian", help="nonzero value distribution")
    s.add_argument(
        "--alg", action="append", default=None, help="algorithm spec such as mols:L=5, repeatable; None runs mols:L=5"
    )
    s.add_argument("--exact-tol", type=float, default=1e-6, help="relative l2 error counted as exact")
    s.add_argument("--plot", default=None, help="also write a gnuplot script here")
    s.add_argument("--ingest", action="append", default=None, help="merge rows from an external sweep CSV")

    q = sub.add_parser("rip", help="exact isometry constants by enumeration", formatter_class=fmt)
    common(q)
    q.add_argument("--matrix", default=None, help="sensing matrix file (required)")
    q.add_argument("--max-order", type=int, default=4, help="largest support size")

    v = sub.add_parser("verify", help="check the recovery and convergence bounds on one instance", formatter_class=fmt)
    common(v)
    v.add_argument("--matrix", default=None, help="sensing matrix file (required)")
    v.add_argument("--truth", default=None, help="true sparse signal file (required)")
    v.add_argument("--y", default=None, help="measurement file; None means noiseless Phi x")
    v.add_argument("--K", type=int, default=None, help="sparsity; None takes that of the truth")
    v.add_argument("--L", type=int, default=1, help="indices selected per iteration")
    v.add_argument("--eps", type=float, default=None, help="residual threshold; None means 1e-6 * ||y||")
    return p


LIST_KEYS = {"alg", "ingest"}


def read_config(path) -> dict:
    out: dict = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise FileFormatError(path, lineno, "expected 'key = value'")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key in LIST_KEYS:
                out.setdefault(key, []).extend(x.strip() for x in val.split(";") if x.strip())
            else:
                out[key] = val
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        explicit = set()
        for tok in argv:
            if tok.startswith("--"):
                explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
            elif tok == "-o":
                explicit.add("output")
        for key, val in cfg.items():
            if key not in actions or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r}")
            if key in explicit:
                continue
            act = actions[key]
            if key in LIST_KEYS:
                setattr(args, key, list(val))
            elif act.nargs == 0:
                setattr(args, key, val.lower() in ("1", "true", "yes", "on"))
            else:
                try:
                    conv = act.type(val) if act.type else val
                except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config key {key}: {exc}") from None
                if act.choices and conv not in act.choices:
                    raise UsageError(f"config key {key}: {val!r} not in {sorted(act.choices)}")
                setattr(args, key, conv)
    if getattr(args, "threads", 1) < 0:
        raise UsageError("--threads must be >= 0")
    return args


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def cmd_gen(args) -> int:
    if not 1 <= args.K <= args.n or args.m < 1:
        raise UsageError("need m >= 1 and 1 <= K <= n")
    snr = _snr(args.snr)
    A = generate_gaussian_matrix(args.m, args.n, child_seed(args.seed, 0))
    x = generate_sparse_signal(args.n, args.K, args.signal, child_seed(args.seed, 1))
    inst = add_noise(ProblemInstance.noiseless(A, x), snr, child_seed(args.seed, 2))
    os.makedirs(args.out_dir, exist_ok=True)
    write_matrix(os.path.join(args.out_dir, "matrix.txt"), A)
    write_signal(os.path.join(args.out_dir, "signal.txt"), x)
    write_vector(os.path.join(args.out_dir, "y.txt"), inst.y)
    return EXIT_OK


def _load_instance(args, truth=None):
    A = read_matrix(args.matrix)
    if args.y is not None:
        y = read_vector(args.y)
        if y.size != A.m:
            raise UsageError(f"dimension mismatch: y has {y.size} entries, matrix has {A.m} rows")
        noise = None if truth is None else y - A.apply(truth)
        return ProblemInstance(A, y, truth, noise)
    if truth is None:
        raise UsageError("--y is required")
    return ProblemInstance.noiseless(A, truth)


def cmd_recover(args) -> int:
    from .baselines import cosamp, irls
    from .solvers import mols, ols, omp

    _require(args, "matrix", "y", "K")
    inst = _load_instance(args)
    params = AlgorithmParams(
        K=args.K, L=args.L, epsilon=args.eps, max_iterations=args.max_iterations, bounded_selection=not args.unbounded
    )
    if args.alg in ("mols", "ols"):
        params.validate_for(inst.m)
    fn = {"mols": mols, "ols": ols, "omp": omp, "cosamp": cosamp, "irls": irls}[args.alg]
    res = fn(inst, params)
    lines = ["record,k,index,value"]
    for i in res.estimated_support:
        lines.append(f"estimate,,{i},{format(float(res.x_hat[i]), '.17g')}")
    for k, rn in enumerate(res.residual_norms):
        lines.append(f"residual,{k},,{format(float(rn), '.17g')}")
    for t in res.trace:
        for i in t.selected:
            lines.append(f"selected,{t.k},{i},")
    lines.append(f"termination,{res.iterations},,{res.termination}")
    payload = f"recover|{args.alg}|{params}|{inst.fingerprint()}"
    _emit(args.output, _header(args.seed, payload) + "\n".join(lines) + "\n")
    return EXIT_SOLVER if res.failed else EXIT_OK


def cmd_sweep(args) -> int:
    algs = [AlgorithmSpec.parse(a) for a in (args.alg or ["mols:L=5"])]
    values = _values(args.values)
    snr = _snr(args.snr)
    spec = SweepSpec(
        m=args.m,
        n=args.n,
        sweep_variable=args.var,
        sweep_values=tuple(values),
        trials=args.trials,
        signal_kind=args.signal,
        algorithms=tuple(algs),
        master_seed=args.seed,
        exact_tol=args.exact_tol,
        K=args.K,
        snr_db=snr,
    )
    externals = [SweepTable.read_csv(p) for p in (args.ingest or [])]

    def log(msg):
        sys.stderr.write(msg + "\n")

    table = run_sweep(spec, workers=_threads(args.threads), log=log)
    for ext in externals:
        table = table.merge(ext)
    _emit(args.output, table.to_csv())
    if args.plot:
        target = args.output if args.output not in (None, "-") else "sweep.csv"
        _emit(args.plot, plot_script(target, "mean_mse" if args.var == "snr_db" else "frequency_exact"))
    return EXIT_OK


def cmd_rip(args) -> int:
    _require(args, "matrix")
    A = read_matrix(args.matrix)
    rep = rip_bruteforce(A, args.max_order, workers=_threads(args.threads))
    lines = ["order,delta,lambda_min,lambda_max,witness"]
    for s, d, w, (lo, hi) in zip(rep.orders, rep.delta, rep.witness_support, rep.eigen_extremes):
        lines.append(f"{s},{d!r},{lo!r},{hi!r},{' '.join(map(str, w))}")
    payload = f"rip|{args.max_order}|{hashlib.sha256(A.entries.tobytes()).hexdigest()}"
    _emit(args.output, _header(args.seed, payload) + "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    _require(args, "matrix", "truth")
    truth = read_signal(args.truth)
    inst = _load_instance(args, truth)
    if truth.n != inst.n:
        raise UsageError(f"dimension mismatch: signal length {truth.n}, matrix has {inst.n} columns")
    K = args.K or truth.K
    params = AlgorithmParams(K=K, L=args.L, epsilon=args.eps, bounded_selection=False)
    params.validate_for(inst.m)
    noisy = inst.noise is not None and bool(np.any(inst.noise))
    res, records = collect_probes(inst, params)
    order = min(inst.n, max(probe_orders(K, args.L, res.iterations), 2 * K, args.L * K, K + 1))
    rip = rip_bruteforce(inst.matrix, order, workers=_threads(args.threads))
    checks = [recovery_condition_from(rip, K, args.L)]
    checks += residual_decay_check(res, rip, K, args.L)
    for rec in records:
        if rec.probes is not None:
            checks += [
                c.__class__(f"{c.name}[k={rec.state.k}]", c.lhs, c.rhs, c.satisfied, c.applicable)
                for c in iteration_bound_check(rec.probes, rec.state, rip, noisy)
            ]
    if noisy:
        checks += noisy_guarantee_check(res, inst, rip, K, args.L, params.epsilon_for(inst.y))
    lines = ["name,applicable,satisfied,lhs,rhs"] + [c.csv_row() for c in checks]
    payload = f"verify|{params}|{inst.fingerprint()}"
    _emit(args.output, _header(args.seed, payload) + "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "recover": cmd_recover, "sweep": cmd_sweep, "rip": cmd_rip, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except EnumerationTooLargeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RESOURCE
    except (FileFormatError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except MolsError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

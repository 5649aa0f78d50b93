"""Plain-text formats for matrices, vectors and sparse signals.

Matrix: first line ``m n``, then m lines of n numbers.
Vector: a matrix with one column (``m 1``).
Signal: first line ``n K``, then K lines ``index value`` (0-based indices).
Lines starting with ``#`` and blank lines are ignored. Numbers are written
with 17 significant digits so a round trip is exact.
"""
from __future__ import annotations

import numpy as np

from .errors import FileFormatError, MolsError
from .problem import SensingMatrix, SparseSignal


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if line and not line.startswith("#"):
                    yield lineno, line.split()
    except UnicodeDecodeError as exc:
        raise FileFormatError(path, 1, f"not a text file ({exc.reason})") from None


def _ints(path, lineno, fields, count):
    if len(fields) != count:
        raise FileFormatError(path, lineno, f"expected {count} integers, got {len(fields)} fields")
    try:
        vals = [int(f) for f in fields]
    except ValueError:
        raise FileFormatError(path, lineno, "expected integers") from None
    return vals


def _floats(path, lineno, fields, count):
    if len(fields) != count:
        raise FileFormatError(path, lineno, f"expected {count} numbers, got {len(fields)}")
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        raise FileFormatError(path, lineno, "malformed number") from None
    if not all(np.isfinite(vals)):
        raise FileFormatError(path, lineno, "non-finite number")
    return vals


def read_array(path) -> np.ndarray:
    it = _lines(path)
    try:
        lineno, head = next(it)
    except StopIteration:
        raise FileFormatError(path, 1, "empty file") from None
    m, n = _ints(path, lineno, head, 2)
    if m < 1 or n < 1:
        raise FileFormatError(path, lineno, "dimensions must be positive")
    rows = []
    last = lineno
    for lineno, fields in it:
        if len(rows) == m:
            raise FileFormatError(path, lineno, f"more than {m} rows")
        rows.append(_floats(path, lineno, fields, n))
        last = lineno
    if len(rows) != m:
        raise FileFormatError(path, last + 1, f"expected {m} rows, found {len(rows)}")
    return np.array(rows, dtype=float).reshape(m, n)


def write_array(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_matrix(path) -> SensingMatrix:
    a = read_array(path)
    norms = np.linalg.norm(a, axis=0)
    normalized = bool(np.all(np.abs(norms - 1.0) <= 1e-12))
    try:
        return SensingMatrix(a, normalized=normalized)
    except MolsError as exc:
        raise FileFormatError(path, 1, str(exc)) from None


def write_matrix(path, matrix: SensingMatrix) -> None:
    write_array(path, matrix.entries)


def read_vector(path) -> np.ndarray:
    a = read_array(path)
    if a.shape[1] != 1:
        raise FileFormatError(path, 1, f"a vector file must have one column, got {a.shape[1]}")
    return a[:, 0]


def write_vector(path, v) -> None:
    write_array(path, np.asarray(v, dtype=float).reshape(-1, 1))


def read_signal(path) -> SparseSignal:
    it = _lines(path)
    try:
        lineno, head = next(it)
    except StopIteration:
        raise FileFormatError(path, 1, "empty file") from None
    n, K = _ints(path, lineno, head, 2)
    pairs = []
    last = lineno
    for lineno, fields in it:
        if len(fields) != 2:
            raise FileFormatError(path, lineno, "expected 'index value'")
        try:
            idx = int(fields[0])
            val = float(fields[1])
        except ValueError:
            raise FileFormatError(path, lineno, "malformed 'index value' pair") from None
        if not 0 <= idx < n:
            raise FileFormatError(path, lineno, f"index {idx} outside [0, {n})")
        pairs.append((idx, val))
        last = lineno
    if len(pairs) != K:
        raise FileFormatError(path, last + 1, f"expected {K} entries, found {len(pairs)}")
    pairs.sort()
    try:
        return SparseSignal(n, [p[0] for p in pairs], [p[1] for p in pairs])
    except MolsError as exc:
        raise FileFormatError(path, 1, str(exc)) from None


def write_signal(path, x: SparseSignal) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{x.n} {x.K}\n")
        for i, v in zip(x.support, x.values):
            fh.write(f"{int(i)} {_fmt(v)}\n")

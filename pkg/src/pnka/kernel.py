"""Column centering and blocked rows of the linear Gram matrix ``K(M) = M M^T``.

The full ``N x N`` kernel is never materialized. Rows are produced in blocks of
``block`` rows, so peak memory is about ``block * N * 8`` bytes per kernel.

Two backends compute a block:

``"ordered"`` (default)
    Every entry ``K[i, j]`` is accumulated over features in ascending index
    order, without fused multiply-add. A row's bits therefore do not depend on
    the block size, the block's position, or how blocks are scheduled over
    threads.
``"blas"``
    One ``matmul`` per block. Several times faster, but the summation order is
    chosen by the BLAS library, so results are only reproducible for a fixed
    block partition.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from numba import njit

from .data import RepresentationMatrix, as_matrix
from .errors import ShapeError, StateError, UnsupportedError

DEFAULT_BLOCK = 1024
BACKENDS = ("ordered", "blas")


class KernelSpec(enum.Enum):
    """Kernel function applied to pairs of representation rows.

    Only the linear kernel ``k(a, b) = a . b`` exists today.
    """

    LINEAR = "linear"

    @classmethod
    def parse(cls, value) -> "KernelSpec":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnsupportedError(f"kernel {value!r} is not supported; only 'linear' is") from None


@dataclass(frozen=True, eq=False)
class KernelRowBlock:
    """Rows ``start_row .. start_row + b - 1`` of ``K(M)`` and their L2 norms."""

    start_row: int
    rows: np.ndarray
    row_norms: np.ndarray

    @property
    def stop_row(self) -> int:
        return self.start_row + self.rows.shape[0]


def center_columns(m) -> RepresentationMatrix:
    """Subtract each column's mean over the rows of ``m``.

    Columns that are exactly constant come out as exact zeros.
    """
    m = as_matrix(m)
    x = m.data
    out = x - x.mean(axis=0)
    out[:, np.all(x == x[0], axis=0)] = 0.0
    return _trusted(out, centered=True)


def _trusted(arr: np.ndarray, centered: bool) -> RepresentationMatrix:
    # Skips the column-mean audit: the caller produced the centering itself.
    obj = object.__new__(RepresentationMatrix)
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    object.__setattr__(obj, "data", arr)
    object.__setattr__(obj, "centered", centered)
    return obj


# -- compiled kernels --------------------------------------------------------


@njit(nogil=True, cache=True)
def _gram_rows_ordered(m, mt, rows_idx, out):  # pragma: no cover - compiled
    b, n = out.shape
    d = m.shape[1]
    r = 0
    # Four rows at a time share each load of mt[k]; per-entry order is still
    # k = 0, 1, ..., d - 1.
    while r + 4 <= b:
        o0 = out[r]
        o1 = out[r + 1]
        o2 = out[r + 2]
        o3 = out[r + 3]
        i0 = rows_idx[r]
        i1 = rows_idx[r + 1]
        i2 = rows_idx[r + 2]
        i3 = rows_idx[r + 3]
        for j in range(n):
            o0[j] = 0.0
            o1[j] = 0.0
            o2[j] = 0.0
            o3[j] = 0.0
        for k in range(d):
            a0 = m[i0, k]
            a1 = m[i1, k]
            a2 = m[i2, k]
            a3 = m[i3, k]
            mk = mt[k]
            for j in range(n):
                v = mk[j]
                o0[j] += a0 * v
                o1[j] += a1 * v
                o2[j] += a2 * v
                o3[j] += a3 * v
        r += 4
    while r < b:
        o = out[r]
        i = rows_idx[r]
        for j in range(n):
            o[j] = 0.0
        for k in range(d):
            a = m[i, k]
            mk = mt[k]
            for j in range(n):
                o[j] += a * mk[j]
        r += 1


@njit(nogil=True, cache=True)
def _row_sq_norms(a, out):  # pragma: no cover - compiled
    b, n = a.shape
    for r in range(b):
        s = 0.0
        for j in range(n):
            s += a[r, j] * a[r, j]
        out[r] = s


@njit(nogil=True, cache=True)
def _row_alignment(a, c, dots, sq_a, sq_c):  # pragma: no cover - compiled
    b, n = a.shape
    for r in range(b):
        s_ac = 0.0
        s_aa = 0.0
        s_cc = 0.0
        for j in range(n):
            x = a[r, j]
            y = c[r, j]
            s_ac += x * y
            s_aa += x * x
            s_cc += y * y
        dots[r] = s_ac
        sq_a[r] = s_aa
        sq_c[r] = s_cc


# -- public API --------------------------------------------------------------


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise UnsupportedError(f"unknown kernel backend {backend!r}; expected one of {BACKENDS}")


def gram_rows(m: RepresentationMatrix, rows_idx, backend: str = "ordered", mt: np.ndarray | None = None) -> np.ndarray:
    """Rows ``rows_idx`` of ``K(m)`` as a ``len(rows_idx) x N`` array.

    ``mt`` may pass a precomputed C-contiguous ``m.data.T`` to avoid
    re-transposing per block.
    """
    _check_backend(backend)
    x = m.data
    rows_idx = np.ascontiguousarray(rows_idx, dtype=np.int64)
    if mt is None:
        mt = np.ascontiguousarray(x.T)
    if backend == "blas":
        return x[rows_idx] @ mt
    out = np.empty((rows_idx.size, x.shape[0]), dtype=np.float64)
    _gram_rows_ordered(x, mt, rows_idx, out)
    return out


def row_norms(rows: np.ndarray) -> np.ndarray:
    sq = np.empty(rows.shape[0], dtype=np.float64)
    _row_sq_norms(np.ascontiguousarray(rows), sq)
    return np.sqrt(sq)


def row_alignment(a: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row ``<a_r, c_r>``, ``|a_r|^2`` and ``|c_r|^2`` in ascending-index order."""
    if a.shape != c.shape:
        raise ShapeError(f"row blocks differ in shape: {a.shape} vs {c.shape}")
    b = a.shape[0]
    dots, sq_a, sq_c = np.empty(b), np.empty(b), np.empty(b)
    _row_alignment(np.ascontiguousarray(a), np.ascontiguousarray(c), dots, sq_a, sq_c)
    return dots, sq_a, sq_c


def kernel_rows(
    m,
    start: int,
    block: int,
    spec: KernelSpec | str = KernelSpec.LINEAR,
    backend: str = "ordered",
) -> KernelRowBlock:
    """Compute rows ``start .. start + block - 1`` of ``K(m)``.

    ``m`` must already be column-centered (see :func:`center_columns`).
    Zero-norm rows are returned as-is; deciding what to do with them is the
    caller's business.
    """
    KernelSpec.parse(spec)
    m = as_matrix(m)
    if not m.centered:
        raise StateError("kernel rows need a column-centered matrix; call center_columns first")
    if block < 1:
        raise ShapeError(f"block must be >= 1, got {block}")
    if start < 0 or start + block > m.n_points:
        raise ShapeError(f"rows {start}..{start + block - 1} out of range for N={m.n_points}")
    rows = gram_rows(m, np.arange(start, start + block), backend=backend)
    return KernelRowBlock(start, rows, row_norms(rows))


def iter_blocks(n: int, block: int) -> Iterator[tuple[int, int]]:
    """Yield ``(start, stop)`` pairs covering ``range(n)`` in order."""
    if block < 1:
        raise ShapeError(f"block must be >= 1, got {block}")
    for start in range(0, n, block):
        yield start, min(start + block, n)


def resolve_threads(threads: int | None) -> int:
    """``threads`` if given, else ``$PNKA_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("PNKA_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ShapeError(f"PNKA_THREADS must be a positive integer, got {env!r}") from None
    if threads < 1:
        raise ShapeError(f"threads must be >= 1, got {threads}")
    return threads


def map_blocks(fn: Callable, chunks: Sequence, threads: int | None = None) -> list:
    """Apply ``fn`` to every chunk; results come back in input order."""
    threads = resolve_threads(threads)
    if threads == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


__all__ = [
    "KernelSpec",
    "KernelRowBlock",
    "center_columns",
    "kernel_rows",
    "gram_rows",
    "row_norms",
    "row_alignment",
    "iter_blocks",
    "map_blocks",
    "resolve_threads",
    "DEFAULT_BLOCK",
    "BACKENDS",
]

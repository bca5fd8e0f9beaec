"""Exact k-nearest neighbors and cross-representation neighbor overlap.

Used to check that PNKA tracks neighborhood preservation: points with high
scores should share more of their ``k`` nearest neighbors across the two
spaces.

Neighbors are ranked on the raw representation rows unless ``centered=True``.
The point itself is never its own neighbor, and equal similarities are broken
by ascending point index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import ScoreVector, as_matrix, as_scores
from .errors import DataError, ShapeError, UnsupportedError
from .kernel import DEFAULT_BLOCK, _trusted, center_columns, gram_rows, map_blocks

METRICS = ("cosine", "l2")
DEFAULT_BINS = 20


@dataclass(frozen=True)
class NeighborSet:
    point: int
    neighbors: tuple[int, ...]
    metric: str
    k: int


@dataclass(frozen=True)
class OverlapBin:
    lower: float
    upper: float
    mean_overlap: float
    count: int


@dataclass(frozen=True, eq=False)
class OverlapReport:
    """Per-point neighbor overlap and its binned relation to PNKA scores."""

    per_point_overlap: np.ndarray
    binned: list[OverlapBin]
    k: int
    metric: str
    spearman: float
    excluded: tuple[int, ...] = field(default=())


def _smallest_k(key: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the ``k`` smallest entries per row, smallest first.

    Ties go to the lower column index, both at the selection boundary and in
    the final ordering.
    """
    b = key.shape[0]
    kth = np.partition(key, k - 1, axis=1)[:, k - 1 : k]
    less = key < kth
    equal = key == kth
    need = k - less.sum(axis=1)
    take = less | (equal & (np.cumsum(equal, axis=1) <= need[:, None]))
    cols = np.nonzero(take)[1].reshape(b, k)
    order = np.argsort(np.take_along_axis(key, cols, axis=1), axis=1, kind="stable")
    return np.take_along_axis(cols, order, axis=1)


def knn_indices(
    m,
    k: int,
    metric: str = "cosine",
    block: int = DEFAULT_BLOCK,
    *,
    centered: bool = False,
    threads: int | None = None,
) -> np.ndarray:
    """``N x k`` array of neighbor indices, nearest first."""
    m = as_matrix(m)
    n = m.n_points
    if metric not in METRICS:
        raise UnsupportedError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not 1 <= k <= n - 1:
        raise ShapeError(f"k must be in [1, {n - 1}], got {k}")
    x = center_columns(m).data if centered else m.data
    sq = np.einsum("ij,ij->i", x, x)
    if metric == "cosine":
        zero = np.flatnonzero(sq == 0.0)
        if zero.size:
            raise DataError(f"row {int(zero[0])} has zero norm; cosine neighbors are undefined")
        x = x / np.sqrt(sq)[:, None]
    mat = _trusted(x, centered=centered)
    xt = np.ascontiguousarray(x.T)

    def work(rows):
        g = gram_rows(mat, rows, mt=xt)
        if metric == "cosine":
            key = -g
        else:
            key = sq[rows, None] + sq[None, :] - 2.0 * g
        key[np.arange(rows.size), rows] = np.inf
        return _smallest_k(key, k)

    chunks = [np.arange(s, min(s + block, n)) for s in range(0, n, block)]
    return np.vstack(map_blocks(work, chunks, threads))


def knn(m, k: int, metric: str = "cosine", block: int = DEFAULT_BLOCK, *, centered: bool = False, threads=None) -> list[NeighborSet]:
    """The ``k`` nearest neighbors of every point, self excluded."""
    idx = knn_indices(m, k, metric, block, centered=centered, threads=threads)
    return [NeighborSet(i, tuple(int(j) for j in row), metric, k) for i, row in enumerate(idx)]


def neighbor_overlap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise ``|a_i & b_i| / k`` for two ``N x k`` neighbor arrays."""
    if a.shape != b.shape:
        raise ShapeError(f"neighbor arrays differ in shape: {a.shape} vs {b.shape}")
    k = a.shape[1]
    merged = np.sort(np.concatenate([a, b], axis=1), axis=1)
    shared = (merged[:, 1:] == merged[:, :-1]).sum(axis=1)
    return shared / k


def bin_by_score(scores, values: np.ndarray, bins: int = DEFAULT_BINS) -> list[OverlapBin]:
    """Mean of ``values`` within equal-width score bins over ``[min score, 1]``.

    Degenerate points are left out. Empty bins report ``nan`` means.
    """
    scores = as_scores(scores)
    if bins < 1:
        raise ShapeError(f"bins must be >= 1, got {bins}")
    mask = scores.defined
    s = scores.scores[mask]
    v = np.asarray(values, dtype=float)[mask]
    if s.size == 0:
        raise DataError("no defined scores to bin")
    lo = min(float(s.min()), 1.0)
    edges = np.linspace(lo, 1.0, bins + 1)
    if lo < 1.0:
        which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, bins - 1)
    else:
        which = np.full(s.size, bins - 1)
    out = []
    for b in range(bins):
        sel = which == b
        count = int(sel.sum())
        mean = float(v[sel].mean()) if count else float("nan")
        out.append(OverlapBin(float(edges[b]), float(edges[b + 1]), mean, count))
    return out


def knn_overlap(
    y,
    z,
    k: int,
    metric: str = "cosine",
    scores: ScoreVector | None = None,
    bins: int = DEFAULT_BINS,
    *,
    block: int = DEFAULT_BLOCK,
    centered: bool = False,
    threads: int | None = None,
) -> OverlapReport:
    """Fraction of shared k-NN per point, binned by PNKA score.

    ``scores`` should come from ``pnka_scores(y, z)``; it is computed here
    when omitted.
    """
    y = as_matrix(y)
    z = as_matrix(z)
    if y.n_points != z.n_points:
        raise ShapeError(f"representations cover different point counts: {y.n_points} vs {z.n_points}")
    if scores is None:
        from .metrics import pnka_scores

        scores = pnka_scores(y, z, block, threads=threads)
    scores = as_scores(scores)
    if len(scores) != y.n_points:
        raise ShapeError(f"{len(scores)} scores for {y.n_points} points")
    ny = knn_indices(y, k, metric, block, centered=centered, threads=threads)
    nz = knn_indices(z, k, metric, block, centered=centered, threads=threads)
    overlap = neighbor_overlap(ny, nz)
    binned = bin_by_score(scores, overlap, bins)
    mask = scores.defined
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = float(stats.spearmanr(scores.scores[mask], overlap[mask])[0]) if mask.sum() > 1 else float("nan")
    return OverlapReport(overlap, binned, k, metric, rho, scores.degenerate_points)


__all__ = [
    "NeighborSet",
    "OverlapBin",
    "OverlapReport",
    "knn",
    "knn_indices",
    "knn_overlap",
    "neighbor_overlap",
    "bin_by_score",
    "METRICS",
]

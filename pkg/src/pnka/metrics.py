"""Pointwise and aggregate PNKA, plus linear CKA as the global baseline.

For two representations ``Y`` (``N x d1``) and ``Z`` (``N x d2``) of the same
inputs, the score of point ``i`` is the cosine between row ``i`` of the
centered linear kernels::

    pnka_i = <K(Y)_i, K(Z)_i> / (|K(Y)_i| |K(Z)_i|),    K(M) = M M^T

``Y_i`` and ``Z_i`` are never compared directly, so ``d1`` and ``d2`` may
differ.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ScoreVector, as_matrix, as_scores
from .errors import DataError, ShapeError
from .kernel import (
    DEFAULT_BLOCK,
    center_columns,
    gram_rows,
    map_blocks,
    row_alignment,
)

# A kernel row is treated as zero when its norm is below this fraction of the
# largest row norm in the same kernel. Rounding leaves ~1e-16 relative residue
# on rows that are exactly at the column mean.
DEGENERATE_RTOL = 1e-10


class DegeneratePointWarning(UserWarning):
    """Some points have a zero kernel row and no defined score."""


def pnka_scores(
    y,
    z,
    block: int = DEFAULT_BLOCK,
    *,
    index: Sequence[int] | None = None,
    threads: int | None = None,
    backend: str = "ordered",
) -> ScoreVector:
    """Per-point PNKA between two representations of the same ``N`` inputs.

    Both inputs are column-centered over their ``N`` rows before the kernels
    are formed, whatever their ``centered`` flag says.

    Parameters
    ----------
    y, z : RepresentationMatrix or array_like
        ``N x d1`` and ``N x d2`` representations; row ``i`` is input ``i``.
    block : int
        Kernel rows computed per work unit.
    index : sequence of int, optional
        Score only these points (in this order). Their kernel rows still span
        all ``N`` points, so the remaining rows act as context.
    threads : int, optional
        Worker threads over blocks; defaults to ``$PNKA_THREADS`` or 1.
        Output does not depend on it.
    backend : {"ordered", "blas"}
        See :mod:`pnka.kernel`.

    Returns
    -------
    ScoreVector
        One score per scored point. Points whose kernel row vanishes in either
        space are reported in ``degenerate_points`` with a ``nan`` score and a
        :class:`DegeneratePointWarning`.
    """
    y = as_matrix(y)
    z = as_matrix(z)
    if y.n_points != z.n_points:
        raise ShapeError(f"representations cover different point counts: {y.n_points} vs {z.n_points}")
    if block < 1:
        raise ShapeError(f"block must be >= 1, got {block}")
    n = y.n_points
    if index is None:
        idx = np.arange(n, dtype=np.int64)
    else:
        idx = np.asarray(index, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ShapeError("index selects no points")
        if idx.min() < 0 or idx.max() >= n:
            raise ShapeError(f"index out of range for N={n}")

    yc = center_columns(y)
    zc = center_columns(z)
    yt = np.ascontiguousarray(yc.data.T)
    zt = np.ascontiguousarray(zc.data.T)

    def work(chunk):
        ky = gram_rows(yc, chunk, backend=backend, mt=yt)
        kz = gram_rows(zc, chunk, backend=backend, mt=zt)
        return row_alignment(ky, kz)

    chunks = [idx[s : s + block] for s in range(0, idx.size, block)]
    parts = map_blocks(work, chunks, threads)
    dots = np.concatenate([p[0] for p in parts])
    norm_y = np.sqrt(np.concatenate([p[1] for p in parts]))
    norm_z = np.sqrt(np.concatenate([p[2] for p in parts]))

    degenerate = (norm_y <= DEGENERATE_RTOL * norm_y.max()) | (norm_z <= DEGENERATE_RTOL * norm_z.max())
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = dots / (norm_y * norm_z)
    bad = np.flatnonzero(degenerate)
    if bad.size:
        shown = ", ".join(str(int(i)) for i in bad[:10]) + (" ..." if bad.size > 10 else "")
        warnings.warn(
            f"{bad.size} point(s) have a zero-norm kernel row and no defined score: {shown}",
            DegeneratePointWarning,
            stacklevel=2,
        )
    return ScoreVector(scores, tuple(bad.tolist()))


@dataclass(frozen=True)
class AggregateScore:
    """Mean PNKA over defined points, with the number of points left out."""

    value: float
    n_defined: int
    n_degenerate: int

    def __float__(self) -> float:
        return self.value


def aggregate_pnka(scores) -> AggregateScore:
    """Arithmetic mean of the defined pointwise scores."""
    scores = as_scores(scores)
    defined = scores.defined_scores
    if defined.size == 0:
        raise DataError("every point is degenerate; aggregate PNKA is undefined")
    return AggregateScore(float(np.mean(defined)), int(defined.size), len(scores.degenerate_points))


def linear_cka(y, z) -> float:
    """Linear CKA, ``|Y^T Z|_F^2 / (|Y^T Y|_F |Z^T Z|_F)`` on centered inputs.

    Uses the ``d x d`` feature-space form, so no ``N x N`` matrix is built.
    """
    y = as_matrix(y)
    z = as_matrix(z)
    if y.n_points != z.n_points:
        raise ShapeError(f"representations cover different point counts: {y.n_points} vs {z.n_points}")
    yc = center_columns(y).data
    zc = center_columns(z).data
    cross = np.linalg.norm(yc.T @ zc) ** 2
    norm_y = np.linalg.norm(yc.T @ yc)
    norm_z = np.linalg.norm(zc.T @ zc)
    if norm_y == 0.0 or norm_z == 0.0:
        raise DataError("a representation has zero variance; CKA is undefined")
    return float(cross / (norm_y * norm_z))


__all__ = [
    "pnka_scores",
    "aggregate_pnka",
    "linear_cka",
    "AggregateScore",
    "DegeneratePointWarning",
    "ScoreVector",
    "DEGENERATE_RTOL",
]

"""Leave-one-neuron-out PNKA and class-affinity neuron selection.

For each neuron (column) ``j`` the full layer is compared with the layer
without ``j``. Points whose scores drop the most are the ones that neuron
represents uniquely; the class mix among the ``top_m`` most affected points
says which classes the neuron is about.

Removing a column and re-centering gives the same centered columns as
centering first and then removing, so with ``X`` the centered layer and ``c``
its column ``j``::

    K(X without j) = K(X) - c c^T

Each leave-one-out kernel therefore costs ``O(N)`` per point once
``|K(X)_i|^2`` and ``K(X) c = X (X^T c)`` are known (``method="rank1"``).
``method="direct"`` recomputes the full ablated kernel per neuron; it exists
to cross-check the fast path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import RepresentationMatrix, ScoreVector, as_labels, as_matrix
from .errors import DataError, ShapeError, UnsupportedError
from .kernel import DEFAULT_BLOCK, center_columns, gram_rows, map_blocks, row_norms
from .metrics import DEGENERATE_RTOL, DegeneratePointWarning, pnka_scores

DEFAULT_TOP_M = 100
DEFAULT_COUNT = 50
MODES = ("most", "least")

# Below this fraction of the full row's squared norm, the rank-one formula
# for the ablated row norm loses too many digits; such points are redone
# exactly.
_CANCELLATION_LIMIT = 1e-6


@dataclass(frozen=True, eq=False)
class NeuronImpact:
    neuron: int
    scores: ScoreVector
    bottom_points: tuple[int, ...]
    class_mix: dict


def ablate_neuron(m, j: int) -> RepresentationMatrix:
    """Drop column ``j``; remaining columns keep their order."""
    m = as_matrix(m)
    d = m.n_dims
    if d < 2:
        raise ShapeError("cannot ablate the only neuron of a layer")
    if not 0 <= j < d:
        raise ShapeError(f"neuron {j} out of range for d={d}")
    return RepresentationMatrix(np.delete(m.data, j, axis=1))


def _bottom(scores: ScoreVector, top_m: int) -> np.ndarray:
    idx = np.flatnonzero(scores.defined)
    order = np.lexsort((idx, scores.scores[idx]))
    return idx[order[:top_m]]


def _class_mix(labels: np.ndarray, points: np.ndarray, categories: Sequence) -> dict:
    if points.size == 0:
        return {c: 0.0 for c in categories}
    picked = labels[points]
    return {c: float(np.count_nonzero(picked == c)) / points.size for c in categories}


def _rank1_scores(x: np.ndarray, full_sq: np.ndarray, kc: np.ndarray, j: int, mat, xt, block: int) -> ScoreVector:
    c = x[:, j]
    cc = float(c @ c)
    num = full_sq - c * kc
    abl_sq = full_sq - 2.0 * c * kc + c * c * cc
    redo = np.flatnonzero(abl_sq < _CANCELLATION_LIMIT * full_sq)
    if redo.size:
        keep = np.ones(x.shape[1], dtype=bool)
        keep[j] = False
        xa = np.ascontiguousarray(x[:, keep])
        for s in range(0, redo.size, block):
            rows = redo[s : s + block]
            k_full = gram_rows(mat, rows, mt=xt)
            k_abl = xa[rows] @ xa.T
            num[rows] = np.einsum("ij,ij->i", k_full, k_abl)
            abl_sq[rows] = np.einsum("ij,ij->i", k_abl, k_abl)
    full_norm = np.sqrt(full_sq)
    abl_norm = np.sqrt(np.maximum(abl_sq, 0.0))
    degenerate = (full_norm <= DEGENERATE_RTOL * full_norm.max()) | (abl_norm <= DEGENERATE_RTOL * abl_norm.max())
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = num / (full_norm * abl_norm)
    bad = np.flatnonzero(degenerate)
    if bad.size:
        warnings.warn(f"neuron {j}: {bad.size} degenerate point(s)", DegeneratePointWarning, stacklevel=3)
    return ScoreVector(scores, tuple(bad.tolist()))


def neuron_impacts(
    m,
    classes,
    top_m: int = DEFAULT_TOP_M,
    *,
    neurons: Sequence[int] | None = None,
    method: str = "rank1",
    block: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> list[NeuronImpact]:
    """PNKA of the full layer against each single-neuron ablation.

    Returns one :class:`NeuronImpact` per neuron (all of them unless
    ``neurons`` restricts the set), holding the pointwise scores, the
    ``top_m`` lowest-scoring points (ties by index) and the class fractions
    among them.
    """
    m = as_matrix(m)
    labels = as_labels(classes)
    labels.check_length(m.n_points, "class labels")
    if m.n_dims < 2:
        raise ShapeError("need at least 2 neurons")
    if top_m < 1:
        raise ShapeError(f"top_m must be >= 1, got {top_m}")
    which = list(range(m.n_dims)) if neurons is None else [int(j) for j in neurons]
    for j in which:
        if not 0 <= j < m.n_dims:
            raise ShapeError(f"neuron {j} out of range for d={m.n_dims}")
    categories = labels.categories
    label_arr = labels.array()

    if method == "direct":
        def one(j):
            return pnka_scores(m, ablate_neuron(m, j), block, threads=1)
    elif method == "rank1":
        mc = center_columns(m)
        x = mc.data
        xt = np.ascontiguousarray(x.T)
        n = m.n_points
        chunks = [np.arange(s, min(s + block, n)) for s in range(0, n, block)]
        full_sq = np.concatenate(map_blocks(lambda r: row_norms(gram_rows(mc, r, mt=xt)) ** 2, chunks, threads))
        kc_all = x @ (xt @ x)

        def one(j):
            return _rank1_scores(x, full_sq, kc_all[:, j], j, mc, xt, block)
    else:
        raise UnsupportedError(f"unknown method {method!r}; expected 'rank1' or 'direct'")

    def impact(j):
        scores = one(j)
        bottom = _bottom(scores, top_m)
        return NeuronImpact(j, scores, tuple(int(i) for i in bottom), _class_mix(label_arr, bottom, categories))

    return map_blocks(impact, which, threads)


def _rank(values: np.ndarray, ids: np.ndarray, count: int, mode: str) -> list[int]:
    if mode not in MODES:
        raise UnsupportedError(f"mode must be one of {MODES}, got {mode!r}")
    if not 1 <= count <= ids.size:
        raise ShapeError(f"count must be in [1, {ids.size}], got {count}")
    key = -values if mode == "most" else values
    order = np.lexsort((ids, key))
    return [int(ids[i]) for i in order[:count]]


def select_neurons(impacts: Sequence[NeuronImpact], cls, count: int = DEFAULT_COUNT, mode: str = "most") -> list[int]:
    """Neurons whose most-affected points hold the highest (``"most"``) or
    lowest (``"least"``) share of class ``cls``."""
    if not impacts:
        raise ShapeError("no neuron impacts given")
    if not any(cls in imp.class_mix for imp in impacts):
        raise DataError(f"class {cls!r} does not occur in the impacts")
    mix = np.array([imp.class_mix.get(cls, 0.0) for imp in impacts])
    ids = np.array([imp.neuron for imp in impacts])
    return _rank(mix, ids, count, mode)


def class_mean_activations(m, classes, cls) -> np.ndarray:
    m = as_matrix(m)
    labels = as_labels(classes)
    labels.check_length(m.n_points, "class labels")
    sel = labels.array() == cls
    if not sel.any():
        raise DataError(f"class {cls!r} has no points")
    return m.data[sel].mean(axis=0)


def select_neurons_by_activation(m, classes, cls, count: int = DEFAULT_COUNT, mode: str = "most") -> list[int]:
    """Baseline: rank neurons by their mean activation over class ``cls``."""
    means = class_mean_activations(m, classes, cls)
    return _rank(means, np.arange(means.size), count, mode)


def impacts_to_json(impacts: Sequence[NeuronImpact]) -> list[dict]:
    return [
        {
            "neuron": imp.neuron,
            "bottom_points": list(imp.bottom_points),
            "class_mix": {str(k): v for k, v in imp.class_mix.items()},
            "min_score": float(np.nanmin(imp.scores.scores)) if len(imp.scores) > len(imp.scores.degenerate_points) else None,
            "mean_score": float(np.nanmean(imp.scores.scores)) if len(imp.scores) > len(imp.scores.degenerate_points) else None,
            "degenerate_points": list(imp.scores.degenerate_points),
        }
        for imp in impacts
    ]


def impacts_from_json(records: Sequence[dict], n_points: int | None = None) -> list[NeuronImpact]:
    """Rebuild impacts for selection. Scores are not stored in JSON, so the
    returned objects carry an all-``nan`` score vector of length ``n_points``
    (or empty)."""
    out = []
    for rec in records:
        try:
            mix = {_label_key(k): float(v) for k, v in rec["class_mix"].items()}
            neuron = int(rec["neuron"])
            bottom = tuple(int(i) for i in rec["bottom_points"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed impact record: {exc}") from None
        n = n_points or 0
        scores = ScoreVector(np.full(n, np.nan), tuple(range(n)))
        out.append(NeuronImpact(neuron, scores, bottom, mix))
    return out


def _label_key(k: str):
    try:
        return int(k)
    except ValueError:
        return k


__all__ = [
    "NeuronImpact",
    "ablate_neuron",
    "neuron_impacts",
    "select_neurons",
    "select_neurons_by_activation",
    "class_mean_activations",
    "impacts_to_json",
    "impacts_from_json",
]

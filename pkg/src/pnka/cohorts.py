"""Score distributions split by cohort: model agreement, correctness,
perturbed vs. original, or any other per-point label.

Every split shares one set of histogram edges (spanning all defined scores)
so group histograms can be overlaid; each group's heights are normalized to
sum to 100 on their own. Degenerate points are excluded from every group and
listed in :attr:`GroupedDistribution.excluded`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import as_labels, as_scores
from .errors import DataError, ShapeError

DEFAULT_THRESHOLD = 0.85
DEFAULT_BINS = 20


@dataclass(frozen=True, eq=False)
class GroupStats:
    count: int
    mean: float
    std: float
    edges: np.ndarray
    heights: np.ndarray
    low_score_count: int

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "low_score_count": self.low_score_count,
            "edges": self.edges,
            "heights": self.heights,
        }


@dataclass(frozen=True, eq=False)
class GroupedDistribution:
    groups: dict
    threshold: float
    excluded: tuple[int, ...] = ()
    gap: float | None = None
    gap_groups: tuple | None = None

    def __getitem__(self, group) -> GroupStats:
        return self.groups[group]

    def renamed(self, mapping: dict) -> "GroupedDistribution":
        groups = {mapping.get(g, g): s for g, s in self.groups.items()}
        return GroupedDistribution(groups, self.threshold, self.excluded, self.gap, self.gap_groups)

    def as_dict(self) -> dict:
        out = {
            "threshold": self.threshold,
            "excluded": list(self.excluded),
            "groups": {str(g): s.as_dict() for g, s in self.groups.items()},
        }
        if self.gap is not None:
            out["mean_gap"] = self.gap
            out["gap_groups"] = [str(g) for g in self.gap_groups]
        return out


def _stats(values: np.ndarray, edges: np.ndarray, threshold: float) -> GroupStats:
    n = values.size
    if n:
        # fsum keeps the statistics independent of point order.
        mean = math.fsum(values) / n
        std = math.sqrt(math.fsum((values - mean) ** 2) / n)
        counts, _ = np.histogram(values, bins=edges)
        heights = counts * (100.0 / n)
    else:
        mean = std = float("nan")
        heights = np.zeros(edges.size - 1)
    return GroupStats(n, mean, std, edges, heights, int((values < threshold).sum()))


def _edges(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width edges over the value range.

    A range too narrow to split into ``bins`` distinct floats (e.g. every
    score 1.0 up to rounding) is treated like constant data: the edges then
    span ``[min - 0.5, max + 0.5]``, matching numpy's rule for equal values.
    """
    lo, hi = float(values.min()), float(values.max())
    edges = np.linspace(lo, hi, bins + 1)
    if hi == lo or np.any(np.diff(edges) <= 0):
        edges = np.linspace(lo - 0.5, hi + 0.5, bins + 1)
    return edges


def _grouped(scores, keys: np.ndarray, order: Sequence, bins: int, threshold: float) -> GroupedDistribution:
    scores = as_scores(scores)
    if keys.shape[0] != len(scores):
        raise ShapeError(f"{keys.shape[0]} labels for {len(scores)} scores")
    if bins < 1:
        raise ShapeError(f"bins must be >= 1, got {bins}")
    mask = scores.defined
    defined = scores.scores[mask]
    if defined.size == 0:
        raise DataError("no defined scores")
    edges = _edges(defined, bins)
    kept = keys[mask]
    groups = {g: _stats(defined[kept == g], edges, threshold) for g in order}
    return GroupedDistribution(groups, threshold, scores.degenerate_points)


def score_histogram(scores, bins: int = DEFAULT_BINS, threshold: float = DEFAULT_THRESHOLD) -> GroupedDistribution:
    """Histogram of all defined scores as a single group ``"all"``."""
    n = len(as_scores(scores))
    return _grouped(scores, np.zeros(n, dtype=int), [0], bins, threshold).renamed({0: "all"})


def _unanimous(predictions: Sequence, n: int) -> np.ndarray:
    preds = [as_labels(p, kind="prediction") for p in predictions]
    if not preds:
        raise ShapeError("need at least one prediction vector")
    for p in preds:
        p.check_length(n, "prediction vector")
    first = preds[0].array()
    same = np.ones(n, dtype=bool)
    for p in preds[1:]:
        same &= p.array() == first
    return same


def _with_gap(dist: GroupedDistribution, a, b) -> GroupedDistribution:
    ga, gb = dist.groups[a], dist.groups[b]
    gap = ga.mean - gb.mean if ga.count and gb.count else float("nan")
    return GroupedDistribution(dist.groups, dist.threshold, dist.excluded, gap, (a, b))


def agreement_split(
    scores, predictions: Sequence, bins: int = DEFAULT_BINS, threshold: float = DEFAULT_THRESHOLD
) -> GroupedDistribution:
    """Split into ``"agree"`` (all prediction vectors identical at the point)
    and ``"disagree"``; ``gap`` is ``mean(agree) - mean(disagree)``."""
    n = len(as_scores(scores))
    same = _unanimous(predictions, n)
    keys = np.where(same, "agree", "disagree")
    return _with_gap(_grouped(scores, keys, ["agree", "disagree"], bins, threshold), "agree", "disagree")


def correctness_split(
    scores,
    predictions: Sequence,
    truth,
    bins: int = DEFAULT_BINS,
    threshold: float = DEFAULT_THRESHOLD,
) -> GroupedDistribution:
    """Split into ``"correct"`` (every model predicts the true label) and
    ``"incorrect"``."""
    n = len(as_scores(scores))
    truth = as_labels(truth)
    truth.check_length(n, "ground-truth labels")
    preds = [as_labels(p, kind="prediction") for p in predictions]
    if not preds:
        raise ShapeError("need at least one prediction vector")
    correct = np.ones(n, dtype=bool)
    t = truth.array()
    for p in preds:
        p.check_length(n, "prediction vector")
        correct &= p.array() == t
    keys = np.where(correct, "correct", "incorrect")
    return _with_gap(_grouped(scores, keys, ["correct", "incorrect"], bins, threshold), "correct", "incorrect")


def cohort_split(
    scores, cohort, bins: int = DEFAULT_BINS, threshold: float = DEFAULT_THRESHOLD
) -> GroupedDistribution:
    """One group per cohort label, in sorted label order."""
    cohort = as_labels(cohort, kind="cohort")
    n = len(as_scores(scores))
    cohort.check_length(n, "cohort labels")
    keys = np.empty(n, dtype=object)
    keys[:] = list(cohort.values)
    return _grouped(scores, keys, cohort.categories, bins, threshold)


__all__ = [
    "GroupStats",
    "GroupedDistribution",
    "score_histogram",
    "agreement_split",
    "correctness_split",
    "cohort_split",
    "DEFAULT_THRESHOLD",
]

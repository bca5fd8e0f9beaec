"""Auditing debiased word embeddings against their baseline.

Three views of how a debiasing method changed an embedding:

* PNKA per word over a word list (how much each word's neighborhood moved),
  grouped by word category;
* the change ``omega`` in each word's projection onto the gender direction
  ``he - she`` of its own embedding;
* the SemBias analogy task: which of four word pairs aligns best with
  ``he - she``.

A plain per-word cosine between the two tables is provided as a baseline; it
needs equal dimensionality and is not invariant to rotations of either table.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cohorts import DEFAULT_BINS, DEFAULT_THRESHOLD, GroupedDistribution, cohort_split
from .data import CohortLabels, EmbeddingTable, RepresentationMatrix, ScoreVector, SemBiasInstance, as_labels
from .errors import DataError, ShapeError
from .kernel import DEFAULT_BLOCK
from .metrics import pnka_scores

GROUPS = ("definition", "stereotype", "neutral")


@dataclass(frozen=True, eq=False)
class DirectionVector:
    vector: np.ndarray
    anchor_words: tuple[str, str]


@dataclass(frozen=True)
class ProjectionChange:
    word: str
    p_base: float
    p_variant: float
    omega: float  # nan when p_base == 0

    @property
    def defined(self) -> bool:
        return not math.isnan(self.omega)


@dataclass(frozen=True)
class SemBiasFrequencies:
    definition: float
    stereotype: float
    neutral: float
    n_scored: int
    n_skipped: int

    def as_dict(self) -> dict:
        return {
            "definition": self.definition,
            "stereotype": self.stereotype,
            "neutral": self.neutral,
            "n_scored": self.n_scored,
            "n_skipped": self.n_skipped,
        }


def direction(emb: EmbeddingTable, pos: str = "he", neg: str = "she") -> DirectionVector:
    """``vector(pos) - vector(neg)`` within one table."""
    g = emb.vector(pos.strip()) - emb.vector(neg.strip())
    if not np.any(g):
        raise DataError(f"direction {pos!r} - {neg!r} is the zero vector")
    return DirectionVector(g, (pos, neg))


def _vec(g) -> np.ndarray:
    return g.vector if isinstance(g, DirectionVector) else np.asarray(g, dtype=np.float64)


def projection_magnitude(w, g) -> float:
    """``|<g, w>|``: absolute scalar projection, not normalized by ``|g|``."""
    w = np.asarray(w, dtype=np.float64)
    gv = _vec(g)
    if w.shape != gv.shape:
        raise ShapeError(f"word vector has shape {w.shape}, direction {gv.shape}")
    return abs(float(w @ gv))


def projection_changes(
    base: EmbeddingTable,
    variant: EmbeddingTable,
    words: Iterable[str],
    pos: str = "he",
    neg: str = "she",
    *,
    shared_direction: bool = False,
) -> list[ProjectionChange]:
    """Relative change ``(p_variant - p_base) / p_base`` per word.

    Each table is projected on its own ``pos - neg`` direction unless
    ``shared_direction`` is set, in which case the base direction is used for
    both (requires equal dimensionality).
    """
    g_base = direction(base, pos, neg)
    g_var = g_base if shared_direction else direction(variant, pos, neg)
    out = []
    for word in words:
        word = word.strip()
        pb = projection_magnitude(base.vector(word), g_base)
        pv = projection_magnitude(variant.vector(word), g_var)
        omega = (pv - pb) / pb if pb > 0 else math.nan
        out.append(ProjectionChange(word, pb, pv, omega))
    return out


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def sembias_scores(emb: EmbeddingTable, inst: SemBiasInstance, pos: str = "he", neg: str = "she") -> list[float]:
    """Cosine of each pair difference ``a - b`` with ``pos - neg``.

    A pair whose difference is the zero vector scores 0.
    """
    g = direction(emb, pos, neg).vector
    return [_cos(emb.vector(a) - emb.vector(b), g) for a, b in inst.pairs]


def sembias_predict(emb: EmbeddingTable, inst: SemBiasInstance, pos: str = "he", neg: str = "she") -> str:
    """Tag of the pair best aligned with the gender direction.

    Ties go to the earlier pair in dataset order.
    """
    scores = sembias_scores(emb, inst, pos, neg)
    return inst.tags[int(np.argmax(scores))]


def sembias_frequencies(
    emb: EmbeddingTable, instances: Sequence[SemBiasInstance], pos: str = "he", neg: str = "she"
) -> SemBiasFrequencies:
    """Percentage of instances predicted as each category.

    Instances with a word missing from ``emb`` are skipped with a warning.
    """
    counts = dict.fromkeys(GROUPS, 0)
    skipped = 0
    for inst in instances:
        missing = [w for w in inst.words if w not in emb]
        if missing:
            skipped += 1
            continue
        counts[sembias_predict(emb, inst, pos, neg)] += 1
    scored = sum(counts.values())
    if skipped:
        warnings.warn(f"skipped {skipped} SemBias instance(s) with out-of-vocabulary words", stacklevel=2)
    if scored == 0:
        raise DataError("no SemBias instance could be scored")
    pct = {k: 100.0 * v / scored for k, v in counts.items()}
    return SemBiasFrequencies(pct["definition"], pct["stereotype"], pct["neutral"], scored, skipped)


def sembias_wordlist(instances: Sequence[SemBiasInstance]) -> tuple[list[str], CohortLabels]:
    """Distinct words of the instances with their category.

    A word that appears under several categories keeps its first one.
    """
    seen: dict[str, str] = {}
    for inst in instances:
        for (a, b), tag in zip(inst.pairs, inst.tags):
            for w in (a, b):
                seen.setdefault(w, tag)
    words = list(seen)
    return words, CohortLabels(tuple(seen[w] for w in words), kind="word-group")


def _context_words(words: list[str], context: Iterable[str] | None) -> list[str]:
    if context is None:
        return words
    listed = set(words)
    return words + [w for w in dict.fromkeys(c.strip() for c in context) if w not in listed]


def pnka_word_scores(
    base: EmbeddingTable,
    variant: EmbeddingTable,
    words: Sequence[str],
    *,
    context: Iterable[str] | None = None,
    block: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> ScoreVector:
    """PNKA for each word in ``words`` between the two tables.

    By default the kernel spans exactly ``words``. With ``context``, the
    kernel rows of the listed words run over ``words`` plus the context
    vocabulary (centering too), and only ``words`` are scored.
    """
    words = [w.strip() for w in words]
    rows = _context_words(words, context)
    y = RepresentationMatrix(base.rows(rows))
    z = RepresentationMatrix(variant.rows(rows))
    index = None if len(rows) == len(words) else np.arange(len(words))
    return pnka_scores(y, z, block, index=index, threads=threads)


def group_score_distributions(
    base: EmbeddingTable,
    variant: EmbeddingTable,
    words: Sequence[str],
    groups,
    *,
    context: Iterable[str] | None = None,
    bins: int = DEFAULT_BINS,
    threshold: float = DEFAULT_THRESHOLD,
    block: int = DEFAULT_BLOCK,
    threads: int | None = None,
) -> GroupedDistribution:
    """PNKA distributions per word group (definition / stereotype / neutral)."""
    groups = as_labels(groups, kind="word-group")
    groups.check_length(len(words), "word groups")
    scores = pnka_word_scores(base, variant, words, context=context, block=block, threads=threads)
    return cohort_split(scores, CohortLabels(groups.values, kind="cohort"), bins, threshold)


def cosine_word_scores(base: EmbeddingTable, variant: EmbeddingTable, words: Sequence[str]) -> ScoreVector:
    """``cos(w_base, w_variant)`` per word; zero vectors are degenerate."""
    if base.dim != variant.dim:
        raise ShapeError(
            f"direct cosine needs equal dimensionality, got {base.dim} and {variant.dim}; PNKA does not"
        )
    words = [w.strip() for w in words]
    a = base.rows(words)
    b = variant.rows(words)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    bad = np.flatnonzero((na == 0) | (nb == 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.einsum("ij,ij->i", a, b) / (na * nb)
    return ScoreVector(cos, tuple(bad.tolist()))


def direct_cosine_baseline(
    base: EmbeddingTable,
    variant: EmbeddingTable,
    words: Sequence[str],
    groups,
    *,
    bins: int = DEFAULT_BINS,
    threshold: float = DEFAULT_THRESHOLD,
) -> GroupedDistribution:
    groups = as_labels(groups, kind="word-group")
    groups.check_length(len(words), "word groups")
    scores = cosine_word_scores(base, variant, words)
    return cohort_split(scores, CohortLabels(groups.values, kind="cohort"), bins, threshold)


def omega_summary(changes: Sequence[ProjectionChange], words: Sequence[str], groups) -> dict:
    """Mean and median omega per group over words with a defined omega."""
    groups = as_labels(groups, kind="word-group")
    by_word = {c.word: c for c in changes}
    out = {}
    for g in groups.categories:
        vals = [by_word[w].omega for w, gw in zip(words, groups.values) if gw == g and w in by_word and by_word[w].defined]
        out[g] = {
            "count": len(vals),
            "mean": math.fsum(vals) / len(vals) if vals else None,
            "median": float(np.median(vals)) if vals else None,
        }
    return out


__all__ = [
    "DirectionVector",
    "ProjectionChange",
    "SemBiasFrequencies",
    "direction",
    "projection_magnitude",
    "projection_changes",
    "sembias_scores",
    "sembias_predict",
    "sembias_frequencies",
    "sembias_wordlist",
    "pnka_word_scores",
    "group_score_distributions",
    "cosine_word_scores",
    "direct_cosine_baseline",
    "omega_summary",
]

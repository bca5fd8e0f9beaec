"""In-memory containers shared by every analysis.

Row order is the only binding between files: row ``i`` of every matrix,
label vector and score vector refers to the same input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ShapeError

# Column means of a centered matrix must vanish up to this fraction of the
# column's largest magnitude.
CENTERING_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class RepresentationMatrix:
    """An ``N x d`` matrix of input representations held in float64.

    The array is copied on construction and frozen, so a matrix can be
    shared freely between threads.
    """

    data: np.ndarray
    centered: bool = False

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise ShapeError(f"representation must be 2-D, got shape {arr.shape}")
        n, d = arr.shape
        if n < 2:
            raise ShapeError(f"need at least 2 points, got {n}")
        if d < 1:
            raise ShapeError("need at least 1 dimension")
        bad = ~np.isfinite(arr)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DataError(f"non-finite entry at row {row}, column {col}")
        if self.centered:
            means = arr.mean(axis=0)
            scale = np.abs(arr).max(axis=0)
            if np.any(np.abs(means) > CENTERING_RTOL * np.maximum(scale, np.finfo(float).tiny)):
                raise DataError("matrix flagged as centered has nonzero column means")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def n_dims(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __repr__(self) -> str:
        return f"RepresentationMatrix(n_points={self.n_points}, n_dims={self.n_dims}, centered={self.centered})"


def as_matrix(m) -> RepresentationMatrix:
    """Coerce an array-like or :class:`RepresentationMatrix` to the latter."""
    if isinstance(m, RepresentationMatrix):
        return m
    return RepresentationMatrix(np.asarray(m))


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Word vectors with their vocabulary, one row per word in file order.

    ``vectors`` is a read-only float64 array rather than a
    :class:`RepresentationMatrix` so that one-word tables stay legal.
    """

    vocabulary: tuple[str, ...]
    vectors: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        vocab = tuple(self.vocabulary)
        vecs = self.vectors.data if isinstance(self.vectors, RepresentationMatrix) else self.vectors
        vecs = np.array(vecs, dtype=np.float64, order="C", copy=True)
        if vecs.ndim != 2 or vecs.shape[1] < 1:
            raise ShapeError(f"embedding vectors must be 2-D with d >= 1, got shape {vecs.shape}")
        if len(vocab) != vecs.shape[0]:
            raise ShapeError(f"{len(vocab)} words but {vecs.shape[0]} vectors")
        if not np.isfinite(vecs).all():
            row = int(np.argwhere(~np.isfinite(vecs))[0, 0])
            raise DataError(f"non-finite value in vector for {vocab[row]!r}")
        index: dict[str, int] = {}
        for i, w in enumerate(vocab):
            if w in index:
                raise DataError(f"duplicate word {w!r} (rows {index[w]} and {i})")
            index[w] = i
        vecs.setflags(write=False)
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_dict(cls, mapping: dict[str, Sequence[float]]) -> "EmbeddingTable":
        words = list(mapping)
        return cls(tuple(words), np.array([mapping[w] for w in words], dtype=float))

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    @property
    def n_points(self) -> int:
        return len(self.vocabulary)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def matrix(self) -> RepresentationMatrix:
        return RepresentationMatrix(self.vectors)

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise DataError(f"word {word!r} not in embedding table") from None

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self.index(word)]

    def rows(self, words: Iterable[str]) -> np.ndarray:
        """Stack the vectors of ``words`` in the given order."""
        idx = [self.index(w) for w in words]
        return self.vectors[idx]

    def scaled(self, alpha: float) -> "EmbeddingTable":
        return EmbeddingTable(self.vocabulary, self.vectors * alpha)

    def transformed(self, matrix: np.ndarray) -> "EmbeddingTable":
        """Return the table with every vector right-multiplied by ``matrix``."""
        return EmbeddingTable(self.vocabulary, self.vectors @ matrix)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-point PNKA scores aligned to input row order.

    Degenerate points (zero-norm kernel row in either space) carry ``nan``
    in :attr:`scores` and are listed in :attr:`degenerate_points`.
    """

    scores: np.ndarray
    degenerate_points: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        s = np.array(self.scores, dtype=np.float64, copy=True)
        if s.ndim != 1:
            raise ShapeError("scores must be a vector")
        degenerate = tuple(sorted(int(i) for i in self.degenerate_points))
        if degenerate and (degenerate[0] < 0 or degenerate[-1] >= s.size):
            raise ShapeError("degenerate index out of range")
        s[list(degenerate)] = np.nan
        if np.isnan(s).sum() != len(degenerate):
            raise DataError("undefined score at an index not marked degenerate")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "degenerate_points", degenerate)

    def __len__(self) -> int:
        return self.scores.size

    @property
    def defined(self) -> np.ndarray:
        """Boolean mask of points with a defined score."""
        mask = np.ones(self.scores.size, dtype=bool)
        mask[list(self.degenerate_points)] = False
        return mask

    @property
    def defined_scores(self) -> np.ndarray:
        return self.scores[self.defined]


def as_scores(scores) -> ScoreVector:
    if isinstance(scores, ScoreVector):
        return scores
    s = np.asarray(scores, dtype=np.float64)
    return ScoreVector(s, tuple(np.flatnonzero(np.isnan(s)).tolist()))


LABEL_KINDS = ("class", "prediction", "cohort", "word-group")


@dataclass(frozen=True, eq=False)
class CohortLabels:
    """Per-point categorical annotations (class, prediction, cohort, word group)."""

    values: tuple
    kind: str = "class"

    def __post_init__(self) -> None:
        if self.kind not in LABEL_KINDS:
            raise DataError(f"unknown label kind {self.kind!r}; expected one of {LABEL_KINDS}")
        vals = np.asarray(self.values)
        if vals.ndim != 1:
            raise ShapeError("labels must be a flat sequence")
        object.__setattr__(self, "values", tuple(vals.tolist()))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def categories(self) -> list:
        """Distinct labels, sorted."""
        return sorted(set(self.values), key=_sort_key)

    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def check_length(self, n: int, what: str = "labels") -> None:
        if len(self) != n:
            raise ShapeError(f"{what} have {len(self)} entries, expected {n}")


def as_labels(labels, kind: str = "class") -> CohortLabels:
    if isinstance(labels, CohortLabels):
        return labels
    return CohortLabels(tuple(np.asarray(labels).tolist()), kind=kind)


def _sort_key(v):
    # Mixed int/str labels sort with numbers first.
    return (isinstance(v, str), v)


SEMBIAS_TAGS = ("definition", "stereotype", "neutral", "neutral")


@dataclass(frozen=True)
class SemBiasInstance:
    """One analogy instance: four ``(a, b)`` word pairs with their tags.

    Pairs are kept in dataset order, which is also the tie-breaking order
    during prediction.
    """

    pairs: tuple[tuple[str, str], ...]
    tags: tuple[str, ...] = SEMBIAS_TAGS

    def __post_init__(self) -> None:
        pairs = tuple((str(a), str(b)) for a, b in self.pairs)
        if len(pairs) != 4 or len(self.tags) != 4:
            raise DataError(f"SemBias instance needs exactly 4 pairs, got {len(pairs)}")
        if sorted(self.tags) != sorted(SEMBIAS_TAGS):
            raise DataError(f"SemBias tags must be one definition, one stereotype and two neutral, got {self.tags}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "tags", tuple(self.tags))

    @property
    def words(self) -> list[str]:
        return [w for pair in self.pairs for w in pair]

"""Pointwise Normalized Kernel Alignment (PNKA).

Per-input similarity between two representation spaces, with the aggregate
and CKA baselines and analyses built on top: neighbor overlap, cohort score
distributions, neuron ablation, and word-embedding bias audits.
"""

from .data import CohortLabels, EmbeddingTable, RepresentationMatrix, ScoreVector, SemBiasInstance
from .errors import DataError, FormatError, IoError, PNKAError, ShapeError, StateError, UnsupportedError
from .kernel import KernelRowBlock, KernelSpec, center_columns, kernel_rows
from .metrics import AggregateScore, DegeneratePointWarning, aggregate_pnka, linear_cka, pnka_scores

__version__ = "0.1.0"

__all__ = [
    "RepresentationMatrix",
    "EmbeddingTable",
    "CohortLabels",
    "ScoreVector",
    "SemBiasInstance",
    "KernelSpec",
    "KernelRowBlock",
    "center_columns",
    "kernel_rows",
    "pnka_scores",
    "aggregate_pnka",
    "linear_cka",
    "AggregateScore",
    "DegeneratePointWarning",
    "PNKAError",
    "FormatError",
    "UnsupportedError",
    "DataError",
    "ShapeError",
    "StateError",
    "IoError",
]

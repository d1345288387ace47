"""Cluster-and-rank selection of instruction-tuning data.

Pipeline: score every instruction pair with a pairwise-preference model,
cluster the pairs in embedding space, keep the global top-n1 plus the top-n2
of every cluster, deduplicate, and write the selected subset.  An evaluation
harness compares model responses with a position-debiased pairwise judge.
"""

__version__ = "0.1.0"

from car.errors import (
    CarError,
    FormatError,
    ManifestError,
    RemoteServiceError,
    ValidationError,
    VerdictParseError,
)

__all__ = [
    "__version__",
    "CarError",
    "ValidationError",
    "FormatError",
    "ManifestError",
    "RemoteServiceError",
    "VerdictParseError",
]

"""Batch active-learning query strategies built around confident K-center selection."""

from confcoreset.errors import (
    ActiveLearningError,
    FormatError,
    InvariantError,
    SelectionError,
    SpecError,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveLearningError",
    "FormatError",
    "InvariantError",
    "SelectionError",
    "SpecError",
    "__version__",
]

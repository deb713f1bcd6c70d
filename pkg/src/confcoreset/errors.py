"""Exception types shared across the package.

The CLI maps these onto exit codes: ``SpecError``, ``FormatError`` and
``SelectionError`` are argument/input problems (2), ``OSError`` is left
untouched and means I/O failure (3), ``InvariantError`` means a bug (4).
"""


class ActiveLearningError(Exception):
    """Base class for all errors raised by this package."""


class SpecError(ActiveLearningError, ValueError):
    """Invalid dataset spec, configuration or fraction."""


class FormatError(ActiveLearningError, ValueError):
    """Malformed input file (ragged rows, bad tokens, empty file, ...)."""


class SelectionError(ActiveLearningError, ValueError):
    """Bad arguments to a selection routine (budget, dimensions, indices)."""


class InvariantError(ActiveLearningError, AssertionError):
    """An internal invariant was violated."""

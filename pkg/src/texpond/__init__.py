"""Texture classification with sparse-coded, flexibly pooled pyramid
features and a locality-constrained collaborative-representation
classifier."""

from .errors import (
    ConvergenceError,
    DegenerateCodesError,
    DegenerateQueryError,
    EmptyGridError,
    FormatError,
    LayoutError,
    TexpondError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DegenerateCodesError",
    "DegenerateQueryError",
    "EmptyGridError",
    "FormatError",
    "LayoutError",
    "TexpondError",
    "ValidationError",
    "__version__",
]

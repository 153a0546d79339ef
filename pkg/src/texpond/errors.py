"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: validation problems exit 2,
solver convergence failures exit 3, and OS-level I/O failures exit 4.
"""


class TexpondError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TexpondError):
    """Input violates a documented precondition or invariant."""


class FormatError(ValidationError):
    """A file exists but cannot be parsed as a supported format."""


class EmptyGridError(ValidationError):
    """No descriptor patch fits inside the image."""


class LayoutError(ValidationError):
    """A pyramid layout is inconsistent with the image or grid spec."""


class DegenerateCodesError(ValidationError):
    """All sparse codes are zero; the dictionary update is undefined."""


class DegenerateQueryError(ValidationError):
    """A zero vector was passed where a unit-normalizable one is required."""


class ConvergenceError(TexpondError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the command line
front end can print one parsable line per failure.
"""


class QLSingError(Exception):
    code = "QLSING_ERROR"


class DomainError(QLSingError, ValueError):
    """Parameters outside the range where an operation is defined."""

    code = "DOMAIN"


class IllPosed(DomainError):
    code = "ILL_POSED"


class NoBracket(QLSingError, RuntimeError):
    """A shooting scan found no sign change of the shooting map."""

    code = "NO_BRACKET"


class NonConvergence(QLSingError, RuntimeError):
    """An iteration hit its cap. ``diagnostics`` holds the history."""

    code = "NON_CONVERGENCE"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ProjectionFailure(QLSingError, RuntimeError):
    code = "PROJECTION_FAILURE"


class EllipticityFailure(QLSingError, RuntimeError):
    code = "ELLIPTICITY_FAILURE"


class DegenerateFit(QLSingError, ValueError):
    code = "DEGENERATE_FIT"


class Ambiguous(QLSingError):
    """The classifier could not separate the candidate verdicts."""

    code = "AMBIGUOUS"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

"""Exception hierarchy shared across the toolkit.

Every error that callers are expected to branch on has its own class so the
command-line layer can map failure modes to stable exit codes.
"""


class QlossError(Exception):
    """Base class for all toolkit errors."""


class ParseError(QlossError):
    """An input file could not be parsed.

    Carries the path and (1-based) line number when known.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        loc = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{loc}: {message}")


class ConfigurationError(QlossError):
    """A configuration value or required key is missing or invalid."""


class NoResonanceError(QlossError):
    """The trace shows no discernible resonance dip."""


class FitDivergedError(QlossError):
    """The least-squares iteration hit its cap without converging.

    ``last_fit`` holds the best iterate reached before giving up.
    """

    def __init__(self, message, last_fit=None):
        self.last_fit = last_fit
        super().__init__(message)


class UnidentifiableParametersError(QlossError):
    """The data cannot constrain the model (rank-deficient Jacobian)."""


class DegenerateAbscissaError(QlossError):
    """All regression points share one abscissa; no line is defined."""


class LinearSolveError(QlossError):
    """The field solver's linear system did not reach its residual target."""

    def __init__(self, message, residual_norm=None):
        self.residual_norm = residual_norm
        super().__init__(message)


class ConvergenceNotReachedError(QlossError):
    """Mesh refinement hit the cell cap before meeting the tolerance.

    ``trajectory`` holds the participation results of every level tried.
    """

    def __init__(self, message, trajectory=()):
        self.trajectory = list(trajectory)
        super().__init__(message)


class InterfaceNotSampledError(QlossError):
    """A layer was requested on an interface the solution never sampled."""

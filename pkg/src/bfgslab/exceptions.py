"""Exception hierarchy for solver and configuration failures."""


class BfgslabError(Exception):
    """Base class for all package errors."""


class ConfigError(BfgslabError, ValueError):
    """Invalid problem/solver configuration or parameter ordering."""


class InputError(BfgslabError, ValueError):
    """Malformed runtime input (dimension mismatch, non-finite entries)."""


class SpdViolationError(BfgslabError):
    """A matrix required to be symmetric positive definite failed a
    symmetric factorization."""


class CurvaturePairError(BfgslabError):
    """A curvature pair with s'y <= 0 reached the BFGS update.

    Under strong convexity plus the curvature condition this cannot
    happen, so it is a hard failure rather than a skipped update.
    """


class NonDescentError(BfgslabError):
    """A line search was started along a non-descent direction."""


class LineSearchError(BfgslabError):
    """Bracketing failed to terminate within the loop budget.

    Carries the full trial history so the caller can see how the
    bracket evolved before the failure.
    """

    def __init__(self, message, trials=None):
        super().__init__(message)
        self.trials = list(trials) if trials is not None else []


class ReferenceSolveError(BfgslabError):
    """The reference Newton solve did not reach the requested tolerance."""


class SolverAbort(BfgslabError):
    """A solver run aborted mid-stream; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace

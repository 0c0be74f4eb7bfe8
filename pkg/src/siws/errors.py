"""Exception hierarchy for the siws package."""


class SiwsError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SiwsError, ValueError):
    """Supplied arrays have inconsistent shapes."""


class NegativeEntry(SiwsError, ValueError):
    """A rate that must be nonnegative (or positive) has the wrong sign."""


class RegimeViolation(SiwsError, ValueError):
    """Parameters fail an inequality required by the declared regime."""


class NegativeInput(SiwsError, ValueError):
    """An input vector required to be componentwise nonnegative is not."""


class MetzlerViolation(SiwsError, ValueError):
    """Matrix has a negative off-diagonal entry where a Metzler one is required."""


class PreconditionViolated(SiwsError, ValueError):
    """An operation's structural precondition does not hold."""


class ParseError(SiwsError, ValueError):
    """Scenario file could not be parsed against the schema."""


class EigenFailure(SiwsError, RuntimeError):
    """Eigensolver did not converge, or two independent paths disagree."""


class NotIrreducible(SiwsError, RuntimeError):
    """Operation requires an irreducible matrix but the pattern is reducible."""


class WrongRegime(SiwsError, RuntimeError):
    """Operation requires the strict (A2) parameter regime."""


class HypothesisViolated(SiwsError, RuntimeError):
    """A theorem-backed operation was invoked outside its hypotheses."""


class BracketFailure(SiwsError, RuntimeError):
    """Upper fixed-point bracket is not strictly positive."""


class NoConvergence(SiwsError, RuntimeError):
    """Iteration budget exhausted before reaching the requested tolerance.

    Carries the best iterate and the last gap so callers can inspect
    near-threshold behavior instead of silently trusting a bad answer.
    """

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap


class CertificateNotFound(SiwsError, RuntimeError):
    """Lyapunov refinement exhausted; carries the best candidate found."""

    def __init__(self, message, p_diag=None, sym_max_eig=None):
        super().__init__(message)
        self.p_diag = p_diag
        self.sym_max_eig = sym_max_eig


class StepSizeUnderflow(SiwsError, RuntimeError):
    """Adaptive integrator drove the step size below the representable floor."""


class ClampExceeded(SiwsError, RuntimeError):
    """Domain projection exceeded the clamp budget: integrator failure."""


class ClosedFormMismatch(SiwsError, RuntimeError):
    """Closed-form and variational paths disagree beyond tolerance."""


class GenerationFailure(SiwsError, RuntimeError):
    """Random scenario generator rejected too many candidate models."""

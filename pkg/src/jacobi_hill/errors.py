"""Exception hierarchy shared by all modules."""


class JacobiHillError(Exception):
    """Base class for library errors."""


class ExprSyntaxError(JacobiHillError, ValueError):
    """Malformed expression text.

    ``offset`` is the byte offset into the source where parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(JacobiHillError, ArithmeticError):
    """Evaluation outside the domain of the expression (1/0, sqrt(-1), overflow)."""


class MetricValidationError(JacobiHillError, ValueError):
    """A metric violates one of its defining invariants.

    ``invariant`` names the violated condition.
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class BranchPointError(JacobiHillError, ValueError):
    """Direct evaluation requested too close to a branch point of a sphere metric."""


class ZeroMomentumError(JacobiHillError, ValueError):
    """The canonical frame is undefined on the zero section."""


class IntegrationError(JacobiHillError, RuntimeError):
    """ODE integration failed (step-size underflow, tolerance failure)."""


class ToleranceError(JacobiHillError, RuntimeError):
    """A numerical certificate (residual, conservation) exceeded its tolerance."""


class AlphaZeroError(JacobiHillError, ValueError):
    """The line-field coordinate alpha crossed zero inside the window."""

    def __init__(self, time):
        super().__init__(f"alpha vanishes at t = {time:.12g}")
        self.time = time


class TagMismatchError(JacobiHillError, ValueError):
    """Scalar solutions carry different parameterisation tags."""


class NotHyperbolicError(JacobiHillError, ValueError):
    """Operation requires a hyperbolic (saddle-type) circle."""


class DegenerateMetricError(JacobiHillError, ValueError):
    """Non-Morse critical point or linearly integrable (constant f or h) input."""


class CertificationError(JacobiHillError, RuntimeError):
    """A constructed line field failed its residual certificate.

    ``candidates`` maps candidate names to diagnostic dictionaries.
    """

    def __init__(self, message, candidates=None):
        super().__init__(message)
        self.candidates = candidates or {}


class AmbiguousHolonomyError(JacobiHillError, RuntimeError):
    pass


class CriticalTorusError(JacobiHillError, ValueError):
    """sgrad F has no normal component: the Liouville torus is critical."""


class PeriodError(JacobiHillError, RuntimeError):
    pass


class GluingError(JacobiHillError, RuntimeError):
    """Regularised limit at a branch point diverges (exponent ratio != 1)."""

    def __init__(self, message, exponent_ratio=None):
        super().__init__(message)
        self.exponent_ratio = exponent_ratio

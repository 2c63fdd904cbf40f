"""Exception types shared across the package."""


class SplitpropError(Exception):
    """Base class for all package-specific errors."""


class LossOfPrecisionError(SplitpropError):
    """Polynomial coefficients overflowed or degraded beyond repair.

    Carries the stage index at which the problem was detected, if known.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class StabilityError(SplitpropError):
    """A scaled step y (or tau*rho) lies outside the stability interval."""


class NearResonanceError(SplitpropError):
    """sin(phi(y)) is numerically zero while K(y) is not +-identity."""

    def __init__(self, message, y=None):
        super().__init__(message)
        self.y = y


class FactorizationError(SplitpropError):
    """A propagation matrix could not be factored into stage maps."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SpectralFactorizationError(SplitpropError):
    """No real (d, e) split exists, or the root finding failed."""


class InfeasibleDesignError(SplitpropError):
    """The requested (m, r, theta') target admits no feasible (p, q) pair."""

"""Exception hierarchy shared by all roundlyap modules."""


class RoundLyapError(Exception):
    """Base class for all roundlyap errors."""


class NonFiniteResult(RoundLyapError):
    """A directed elementary operation overflowed to +/-inf or produced NaN.

    Signals trajectory escape to simulation callers.
    """


class UnsupportedDirection(RoundLyapError):
    """The floating-point environment backend cannot honor a rounding
    direction on this host.  Callers should fall back to the software
    emulation backend."""


class ContextNotActive(RoundLyapError):
    """A hardware-backed directed operation was issued outside an active
    ``with`` scope, so the rounding direction is not guaranteed."""


class TrajectoryEscape(RoundLyapError):
    """An orbit left its invariant region (non-finite state or magnitude
    above the escape bound).  The initial condition is counted as failed."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularDenominator(RoundLyapError):
    """The paper-literal delay-system denominator came within 1e-12 of zero."""


class OutOfRange(RoundLyapError):
    """Initial condition outside the system's admissible interval."""


class UnknownSystem(RoundLyapError):
    """Requested system name is not in the registry."""


class NoDivergence(RoundLyapError):
    """The two rounding channels never produced different observables."""


class WindowTooShort(RoundLyapError):
    """Fewer than the minimum usable points in the log-error fit window."""


class DegenerateGain(RoundLyapError):
    """The recursive least-squares gain denominator was not positive;
    indicates a fatal numerics fault (covariance lost positive
    definiteness)."""


class SingularSystem(RoundLyapError):
    """The batch least-squares normal equations are numerically singular."""


class InsufficientData(RoundLyapError):
    """Too few values for the requested statistic."""


class AllIcsFailed(RoundLyapError):
    """No initial condition in an experiment produced a usable fit."""


class ConfigError(RoundLyapError):
    """Invalid CLI configuration file (unknown key or bad value)."""

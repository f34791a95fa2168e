"""Exception types shared across the solver modules.

Every error carries enough context to restart from a different seed:
the sequential extremal construction aborts as soon as an interval
fails to produce a well-defined control, and the shooting layer treats
that as a failed residual evaluation rather than a fatal condition.
"""

__all__ = [
    "MinpulseError",
    "ZeroGeneratorError",
    "DegenerateMomentsError",
    "NoRealRootError",
    "NoAlignedRootError",
    "ZeroCouplingError",
    "InvalidTailError",
    "NoConvergenceError",
    "AllSeedsFailedError",
    "StalledError",
    "InsufficientDataError",
]


class MinpulseError(Exception):
    """Base class for all package-specific errors."""


class ZeroGeneratorError(MinpulseError):
    """Both generator amplitudes vanish; the interval rotation is undefined."""


class DegenerateMomentsError(MinpulseError):
    """P is parallel to X, so every moment vanishes and no control is selected.

    Attributes
    ----------
    interval : int or None
        Index of the offending interval when raised during propagation.
    """

    def __init__(self, msg: str = "adjoint parallel to state: moments vanish",
                 interval: int | None = None):
        super().__init__(msg if interval is None else f"{msg} (interval {interval})")
        self.interval = interval


class NoRealRootError(MinpulseError):
    """The extremal-phase quadratic has a negative discriminant.

    Attributes
    ----------
    interval : int or None
        Index of the offending interval when raised during propagation.
    """

    def __init__(self, msg: str = "extremal-phase quadratic has no real root",
                 interval: int | None = None):
        super().__init__(msg if interval is None else f"{msg} (interval {interval})")
        self.interval = interval


class NoAlignedRootError(NoRealRootError):
    """Both quadratic roots minimize (not maximize) the interval Hamiltonian."""

    def __init__(self, interval: int | None = None):
        super().__init__("no quadratic root maximizes the interval Hamiltonian",
                         interval)


class ZeroCouplingError(MinpulseError):
    """The fixed transverse coupling is zero; the detuning control is inert."""


class InvalidTailError(MinpulseError):
    """The final-interval length is outside (0, T]."""


class NoConvergenceError(MinpulseError):
    """An iterative solve exhausted its budget without meeting its tolerance."""


class AllSeedsFailedError(MinpulseError):
    """No multistart seed converged to a valid solution."""


class StalledError(MinpulseError):
    """A line search could not find an acceptable step."""


class InsufficientDataError(MinpulseError):
    """Too few converged rows to fit the requested convergence model."""

"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BistabilityError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(BistabilityError, ValueError):
    """A physical or numerical input is outside its allowed domain."""


class NumericalError(BistabilityError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class DegenerateSystemError(NumericalError):
    """The linear (Lyapunov) system is singular or the Jacobian is unstable."""


class SingularResolventError(NumericalError):
    """The Laplace variable sits on an eigenvalue of the propagator."""


class PoleError(NumericalError):
    """A rational closed form was evaluated at a root of its denominator."""


class OscillatoryRegimeError(BistabilityError, ValueError):
    """Closed forms need a real, positive Rabi frequency."""


class IntegrationError(NumericalError):
    """Time propagation failed or two propagators disagree."""


class DiagnosticsError(NumericalError):
    """A computed state violates a physical invariant (trace, positivity, cutoff)."""


class WeakExcitationWarning(UserWarning):
    """An approximation valid only for weak excitation was used outside that regime."""

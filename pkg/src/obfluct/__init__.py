"""Quantum fluctuations in weakly driven absorptive optical bistability."""

from .core import (Branch, DimensionlessParams, OperatingPoint, PhysicalParams, derive_dimensionless,
                   intracavity_roots, steady_averages, turning_points)
from .errors import (BistabilityError, DiagnosticsError, IntegrationError, InvalidParameterError,
                     NumericalError, OscillatoryRegimeError, PoleError, SingularResolventError,
                     WeakExcitationWarning)
from .fluctuations import (BASIS, CorrelationTrace, CovarianceMatrix, FluctuationSystem, build_jacobian,
                           correlation_trace, evolve_covariance, laplace_correlation, spectrum_trace,
                           steady_covariance)

__version__ = "0.1.0"

__all__ = [
    "BASIS", "Branch", "BistabilityError", "CorrelationTrace", "CovarianceMatrix", "DiagnosticsError",
    "DimensionlessParams", "FluctuationSystem", "IntegrationError", "InvalidParameterError",
    "NumericalError", "OperatingPoint", "OscillatoryRegimeError", "PhysicalParams", "PoleError",
    "SingularResolventError", "WeakExcitationWarning", "build_jacobian", "correlation_trace",
    "derive_dimensionless", "evolve_covariance", "intracavity_roots", "laplace_correlation",
    "spectrum_trace", "steady_averages", "steady_covariance", "turning_points", "__version__",
]

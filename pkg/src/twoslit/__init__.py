"""Two-photon double-slit simulator.

Standard-quantum-mechanics coincidence patterns, de Broglie-Bohm trajectory
ensembles for the same geometry, and a virtual coincidence-counting
experiment.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AggregationError,
    CalibrationError,
    ConfigurationError,
    CorrectionError,
    DomainError,
    IntegrationError,
    SamplingError,
    TwoSlitError,
)
from .geometry import DetectorPlacement, ExperimentGeometry, angle_from_position, angular_acceptance, wavevector  # noqa: E402

__all__ = [
    "__version__",
    "AggregationError", "CalibrationError", "ConfigurationError", "CorrectionError",
    "DomainError", "IntegrationError", "SamplingError", "TwoSlitError",
    "DetectorPlacement", "ExperimentGeometry", "angle_from_position", "angular_acceptance", "wavevector",
]

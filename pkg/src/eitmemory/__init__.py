"""Simulation of storing dual-rail photonic entanglement in an EIT memory."""

from .config import ExperimentConfig
from .errors import (
    CalibrationError,
    DataInsufficientError,
    FitError,
    GridStabilityError,
    UndefinedStatisticError,
    ValidationError,
)

__all__ = [
    "ExperimentConfig",
    "CalibrationError",
    "DataInsufficientError",
    "FitError",
    "GridStabilityError",
    "UndefinedStatisticError",
    "ValidationError",
]
__version__ = "0.1.0"

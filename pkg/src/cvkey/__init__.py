"""Key rates of Gaussian-modulated coherent-state CV-QKD under canonical Gaussian attacks."""
from .canonical_forms import CanonicalForm, parse_channel
from .composable import ComposableConfig, ComposableResult, composable_rate, optimize
from .errors import (
    ContractError,
    DegenerateMeasurementError,
    DilationNotConfigured,
    DomainError,
    NumericalError,
)
from .gaussian_core import CovMatrix, symplectic_spectrum
from .param_estimation import PEConfig, worst_case_rate
from .rate_engine import ProtocolConfig, asymptotic_rate, form_from_descriptor, security_threshold

__version__ = "0.1.0"

__all__ = [
    "CanonicalForm", "ComposableConfig", "ComposableResult", "ContractError", "CovMatrix",
    "DegenerateMeasurementError", "DilationNotConfigured", "DomainError", "NumericalError",
    "PEConfig", "ProtocolConfig", "asymptotic_rate", "composable_rate", "form_from_descriptor",
    "optimize", "parse_channel", "security_threshold", "symplectic_spectrum", "worst_case_rate",
]

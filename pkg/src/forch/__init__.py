"""Radial steady states of two-phase generalized Forchheimer flow and
numerical checks of their linear stability."""

__version__ = "0.1.0"

from .constitutive import (M0, CallableModel, ConstitutiveModel, FlowParams, GeneralizedPolynomial,
                           PowerLawModel, TabulatedModel, validate_model)
from .errors import (ConfigurationError, DomainError, ForchError, GeometryError, NumericError, ShapeError,
                     SingularPermeability, TailNotResolved)
from .linearize import CoefficientField, ConstantsPack, coeffs_at, constants
from .steady import classify_case, estimate_s_infty, integrate_profile

__all__ = [
    "__version__",
    "M0",
    "CallableModel",
    "ConstitutiveModel",
    "FlowParams",
    "GeneralizedPolynomial",
    "PowerLawModel",
    "TabulatedModel",
    "validate_model",
    "ConfigurationError",
    "DomainError",
    "ForchError",
    "GeometryError",
    "NumericError",
    "ShapeError",
    "SingularPermeability",
    "TailNotResolved",
    "CoefficientField",
    "ConstantsPack",
    "coeffs_at",
    "constants",
    "classify_case",
    "estimate_s_infty",
    "integrate_profile",
]

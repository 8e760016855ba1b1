"""Energy functions, built-in motor models and structural checks."""

from .base import (
    N_SEEDS,
    EnergyDerivatives,
    EnergyFunction,
    MechanicalParams,
    eval_with_derivatives,
    math_for,
)
from .checks import (
    SYMMETRY_KINDS,
    CheckReport,
    RawCurrentMap,
    check_reciprocity,
    check_symmetry,
    expected_symmetries,
    sample_points,
)
from .models import (
    N_QUADRATIC_COEFFICIENTS,
    IMEnergy,
    IMParams,
    NonSinusoidalEnergy,
    NonSinusoidalTerm,
    PMSMEnergy,
    PMSMParams,
    QuadraticEnergy,
    QuadraticEnergyParams,
    SaturatedPMSMEnergy,
    SaturatedPMSMParams,
    SynRMEnergy,
    TransformedEnergy,
    build_im,
    build_nonsinusoidal_pmsm,
    build_pmsm,
    build_quadratic,
    build_saturated_pmsm,
    build_synrm,
    reference_mech,
    reference_saturated_params,
    transform_energy,
)

__all__ = [name for name in dir() if not name.startswith("_")]

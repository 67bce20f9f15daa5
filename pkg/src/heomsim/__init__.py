"""Open-system decoherence toolkit: exact hierarchy and Born-Markov solvers."""

__version__ = "0.1.0"

from .analysis import (
    EffectiveBath,
    PeakClassification,
    SpectrumResult,
    classify_peaks,
    cosine_spectrum,
    effective_spectral_density,
    solve_zeta,
)
from .bath import (
    BathExpansion,
    LorentzSpectrum,
    OhmicDrudeSpectrum,
    correlation_quadrature,
    evaluate_spectral_density,
    expand_lorentz_zero_temperature,
    expand_matsubara,
    expansion_error,
    matsubara_count_auto,
)
from .born_markov import MarkovianSystem, bm_rhs, build_upsilon_xi, eigendecompose
from .heom import HierarchySystem, build_hierarchy
from .integrator import (
    IntegratorConfig,
    Trajectory,
    converge,
    default_config,
    integrate,
)
from .models import ModelSpec, dephasing_model, dephasing_oracle, two_qubit_model

__all__ = [
    "__version__",
    "BathExpansion",
    "EffectiveBath",
    "HierarchySystem",
    "IntegratorConfig",
    "LorentzSpectrum",
    "MarkovianSystem",
    "ModelSpec",
    "OhmicDrudeSpectrum",
    "PeakClassification",
    "SpectrumResult",
    "Trajectory",
    "bm_rhs",
    "build_hierarchy",
    "build_upsilon_xi",
    "classify_peaks",
    "converge",
    "correlation_quadrature",
    "cosine_spectrum",
    "default_config",
    "dephasing_model",
    "dephasing_oracle",
    "effective_spectral_density",
    "eigendecompose",
    "evaluate_spectral_density",
    "expand_lorentz_zero_temperature",
    "expand_matsubara",
    "expansion_error",
    "integrate",
    "matsubara_count_auto",
    "solve_zeta",
    "two_qubit_model",
]

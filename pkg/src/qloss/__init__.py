"""Loss characterization toolkit for superconducting resonators and qubits.

Fits complex transmission traces of notch-coupled quarter-wave resonators,
calibrates intra-resonator photon number, builds participation-ratio loss
budgets, extracts per-junction-electrode loss by regression, and computes
thin-film interface participations from a 2D electrostatic cross-section
solver.
"""

__version__ = "0.1.0"

from .calibration import (
    LineCalibration,
    loaded_q,
    mean_photon_number,
    qi_from_t1,
    t1_from_qi,
)
from .lossmodel import (
    CircuitCapacitances,
    LossBudget,
    LossChannel,
    SiteLossFit,
    fit_loss_per_site,
    infer_loss_tangent,
    participation_equivalence,
    total_quality,
    voltage_ratio_squared,
)
from .resonance import (
    ComplexTrace,
    FitConfig,
    ResonanceFit,
    fit_trace,
    initial_guess,
    model_inverse_s21,
    model_s21,
    synthesize_trace,
)

__all__ = [
    "__version__",
    "ComplexTrace",
    "ResonanceFit",
    "FitConfig",
    "model_inverse_s21",
    "model_s21",
    "synthesize_trace",
    "initial_guess",
    "fit_trace",
    "LineCalibration",
    "loaded_q",
    "mean_photon_number",
    "qi_from_t1",
    "t1_from_qi",
    "LossBudget",
    "LossChannel",
    "SiteLossFit",
    "CircuitCapacitances",
    "total_quality",
    "fit_loss_per_site",
    "infer_loss_tangent",
    "participation_equivalence",
    "voltage_ratio_squared",
]

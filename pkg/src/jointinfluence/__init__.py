"""Joint influence modelling of search queries driven by correlated events."""
from .core import (
    MarkedPoint,
    ModelParams,
    PointSequence,
    cumulative_decay,
    decay,
    impact,
    pareto_pdf,
)
from .estimation import FitConfig, FitResult, fit, fit_marks, penalized_objective
from .estimator import JointInfluenceModel
from .intensity import (
    average_influence,
    compensator,
    influence_summary,
    intensity_at_points,
    intensity_brute_force,
    intensity_trace,
    log_likelihood,
    spectral_radius,
)
from .simulation import SimConfig, simulate

__all__ = [
    "MarkedPoint", "ModelParams", "PointSequence",
    "decay", "cumulative_decay", "pareto_pdf", "impact",
    "intensity_at_points", "intensity_brute_force", "compensator",
    "log_likelihood", "spectral_radius", "average_influence",
    "influence_summary", "intensity_trace",
    "FitConfig", "FitResult", "fit", "fit_marks", "penalized_objective",
    "JointInfluenceModel", "SimConfig", "simulate",
]

__version__ = "0.1.0"

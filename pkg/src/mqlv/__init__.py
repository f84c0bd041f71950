"""MQLV: event-probability estimation on mean-reverting Monte Carlo paths.

A batch backward Q-iteration learns the variance-minimizing action and
Q-function over Vasicek-simulated paths; the t=0 Q-values give the probability
of the terminal level reaching a threshold.  A closed-form digital reference
and an experiment harness are included for cross-validation.
"""

from .basis import BasisSpec, build_spec, evaluate, evaluate_matrix
from .bsm_ref import BsmInputs, digital_curve, digital_price, digital_probability, norm_cdf
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateDomainError,
    InvalidInputError,
    MqlvError,
    SolverFailure,
)
from .learner import FitResult, LearnerConfig, ProbabilityEstimate, event_probability, fit
from .vasicek import (
    PathGrid,
    StateGrid,
    VasicekParams,
    analytic_mean,
    analytic_var,
    calibrate,
    delta_s,
    exact_step,
    rmse,
    simulate,
    to_state,
)

__version__ = "0.1.0"

__all__ = [
    "VasicekParams",
    "PathGrid",
    "StateGrid",
    "exact_step",
    "simulate",
    "analytic_mean",
    "analytic_var",
    "to_state",
    "delta_s",
    "calibrate",
    "rmse",
    "BasisSpec",
    "build_spec",
    "evaluate",
    "evaluate_matrix",
    "LearnerConfig",
    "FitResult",
    "ProbabilityEstimate",
    "fit",
    "event_probability",
    "BsmInputs",
    "norm_cdf",
    "digital_probability",
    "digital_price",
    "digital_curve",
    "MqlvError",
    "InvalidInputError",
    "ConfigError",
    "CalibrationError",
    "DegenerateDomainError",
    "SolverFailure",
]

from .nonparametric import FitReport, fit_nonparametric, transition_counts
from .parametric import (
    ParametricBehaviorModel,
    fit_parametric,
    log_likelihood,
    log_likelihood_gradient,
    materialize,
)

from .batch import run_batched
from .runner import (
    ExperimentContext,
    behavior_convergence_frame,
    bounds_frame,
    build_context,
    decomposition_frame,
    end_to_end_frame,
    fit_behavior_model,
    mechanism_convergence_frame,
    sharing_ablation_frame,
)

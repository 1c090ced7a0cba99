from .covers import CoverReport, NestedCoverReport, cover, induced_tv_matrix, minimal_cover_size, nested_cover
from .estimates import (
    LipschitzEstimate,
    StabilityEstimate,
    lipschitz_estimate,
    perturb_model,
    stability_constant_estimate,
    stability_ratio,
)
from .formulas import (
    BoundValue,
    MixingParameters,
    PdimCoveringProvider,
    TableCoveringProvider,
    TotalBound,
    behavior_bound_nonparametric,
    behavior_bound_parametric,
    dominant_log_term,
    pdim_covering_number,
    split_eps,
    total_bound,
    uniform_bound,
)
from .decomposition import DecompositionReport, decomposition_check

from .engine import (
    ErgodicityCertificate,
    MarginalKernel,
    StationaryDistribution,
    ergodicity_certificate,
    exact_risk,
    marginal_kernel,
    model_inf_distance,
    reachable_rows,
    simulate,
    simulate_behaviors,
    stationary_distribution,
    step,
    tv_distance,
)

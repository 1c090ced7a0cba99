from .gsp import (
    SIGNAL_LABELS,
    BidProfile,
    GspEnvironment,
    ReserveMechanism,
    gsp_revenue,
    reserve_distance,
    shown_count,
    signal_label,
)
from .models import make_adaptive_model, make_iid_model, make_signal_independent_model, make_true_model
from .builders import build_environment, build_true_model, logging_mechanism, reserve_space, user_distribution

from .settings import (
    DEFAULT_CONFIG,
    AuctionConfig,
    BehaviorLearningConfig,
    BoundsConfig,
    ExperimentConfig,
    GtmlConfig,
    Settings,
    load_config,
    parse_config,
)

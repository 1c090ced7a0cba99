"""
Config schema and loading.

Config files are JSON; every block is a pydantic model with extra="forbid", so unknown keys
are rejected. Process-level defaults (config path, output directory, run registry, log level)
come from the environment, optionally through a .env file.
"""
import json
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gtml.core.errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent
DEFAULT_CONFIG = CONFIG_DIR / "default.json"
SCHEMA_VERSION = 1

Embedding = Optional[Union[List[float], List[List[float]]]]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QueryConfig(_Block):
    name: str
    prob: float = Field(ge=0, le=1)
    click_probs: List[float] = Field(min_length=2, max_length=2)

    @field_validator("click_probs")
    @classmethod
    def _click_range(cls, v):
        if any(p < 0 or p > 1 for p in v):
            raise ValueError("click probabilities must lie in [0, 1]")
        return v


class AuctionConfig(_Block):
    advertisers: int = Field(3, ge=2)
    bid_grid: List[float] = Field(default_factory=lambda: [1.0, 2.0], min_length=1)
    reserve_grid: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0], min_length=1)
    queries: List[QueryConfig] = Field(min_length=1)
    logging_reserves: Optional[List[float]] = None

    @model_validator(mode="after")
    def _consistent(self):
        if any(b <= 0 for b in self.bid_grid) or len(set(self.bid_grid)) != len(self.bid_grid):
            raise ValueError("bid_grid must hold distinct positive values")
        max_bid = max(self.bid_grid)
        if any(r < 0 or r > max_bid for r in self.reserve_grid):
            raise ValueError(f"reserve_grid values must lie in [0, {max_bid}]")
        total = sum(q.prob for q in self.queries)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"query probabilities must sum to 1, got {total!r}")
        if len({q.name for q in self.queries}) != len(self.queries):
            raise ValueError("query names must be unique")
        if self.logging_reserves is not None:
            if len(self.logging_reserves) != len(self.queries):
                raise ValueError("logging_reserves needs one value per query")
            if any(r < 0 or r > max_bid for r in self.logging_reserves):
                raise ValueError(f"logging_reserves must lie in [0, {max_bid}]")
        return self


class SpacesConfig(_Block):
    behavior_embedding: Embedding = None
    signal_embedding: Embedding = None


class TrueModelConfig(_Block):
    kind: Literal["random", "adaptive", "signal_independent", "iid"] = "adaptive"
    floor: float = Field(0.01, gt=0)
    seed: Optional[int] = None


class MarkovConfig(_Block):
    tol: float = Field(1e-12, gt=0)
    max_iters: int = Field(1_000_000, ge=1)
    init: Literal["stationary", "burn_in"] = "stationary"
    burn_in: Optional[int] = Field(None, ge=0)
    max_N: int = Field(8, ge=1)


class BehaviorLearningConfig(_Block):
    method: Literal["nonparametric", "parametric"] = "nonparametric"
    fallback: Literal["uniform", "identity"] = "uniform"
    W: float = Field(2.0, ge=0)
    features: List[Literal["behavior", "signal", "bias"]] = Field(
        default_factory=lambda: ["behavior", "signal", "bias"], min_length=1
    )
    restarts: int = Field(10, ge=1)
    grad_tol: float = Field(1e-6, gt=0)
    max_iters: int = Field(500, ge=1)


class MechanismLearningConfig(_Block):
    delta: Optional[float] = Field(None, ge=0)
    rule: Optional[Literal["d_A", "tv"]] = "d_A"
    tv_radius: float = Field(0.01, ge=0)


class BoundsConfig(_Block):
    beta0: float = Field(1.0, ge=0)
    gamma: float = Field(2.0, ge=0)
    s: float = Field(0.5, gt=0)
    alpha: Optional[float] = Field(None, ge=0)
    C1: float = Field(1.0, gt=0)
    C2: float = Field(1.0, gt=0)
    C_M: Optional[float] = Field(None, ge=0)
    pdim: int = Field(1, ge=1)
    eps_split: float = Field(0.5, gt=0, lt=1)
    perturbations: int = Field(20, ge=1)
    magnitude: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _s_below_gamma(self):
        if not self.s < self.gamma:
            raise ValueError(f"s must lie in (0, gamma); got s={self.s}, gamma={self.gamma}")
        return self


class ExperimentConfig(_Block):
    name: str = "default"
    T1: List[int] = Field(default_factory=lambda: [1000, 10000, 100000], min_length=1)
    T2: List[int] = Field(default_factory=lambda: [100, 1000, 10000], min_length=1)
    grid_sizes: List[int] = Field(default_factory=lambda: [5, 50, 500], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: list(range(20)), min_length=1)
    eps: float = Field(0.5, gt=0)
    method: Literal["nonparametric", "parametric"] = "nonparametric"
    simulate_T: int = Field(10, ge=1)
    jobs: int = Field(1, ge=1)
    single_user: bool = True
    out_dir: Optional[str] = None

    @field_validator("T1", "T2", "grid_sizes")
    @classmethod
    def _positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("sweep values must be positive")
        return v


class GtmlConfig(_Block):
    schema_version: Literal[1]
    seed: int = 0
    loss_bound: Optional[float] = Field(None, gt=0)
    auction: AuctionConfig
    spaces: SpacesConfig = Field(default_factory=SpacesConfig)
    true_model: TrueModelConfig = Field(default_factory=TrueModelConfig)
    markov: MarkovConfig = Field(default_factory=MarkovConfig)
    behavior_learning: BehaviorLearningConfig = Field(default_factory=BehaviorLearningConfig)
    mechanism_learning: MechanismLearningConfig = Field(default_factory=MechanismLearningConfig)
    bounds: BoundsConfig = Field(default_factory=BoundsConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)

    @property
    def max_bid(self) -> float:
        return max(self.auction.bid_grid)

    @property
    def K(self) -> float:
        return self.loss_bound if self.loss_bound is not None else 2.0 * self.max_bid

    @property
    def delta(self) -> float:
        """Sharing radius; defaults to the smallest reserve-grid step."""
        if self.mechanism_learning.delta is not None:
            return self.mechanism_learning.delta
        grid = sorted(set(self.auction.reserve_grid))
        steps = [b - a for a, b in zip(grid, grid[1:])]
        return min(steps) if steps else 0.0


class Settings:
    """Process-level defaults read from the environment."""

    def __init__(self):
        self.config_path = os.getenv("GTML_CONFIG", str(DEFAULT_CONFIG))
        self.out_dir = os.getenv("GTML_OUT_DIR", "results")
        self.db_path = os.getenv("GTML_DB_PATH", "gtml_runs.db")
        self.log_level = os.getenv("GTML_LOG_LEVEL", "INFO")


def parse_config(data: dict) -> GtmlConfig:
    try:
        return GtmlConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}") from e


def load_config(path: Optional[Union[str, Path]] = None) -> GtmlConfig:
    path = Path(path or Settings().config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    config = parse_config(data)
    logger.debug("loaded config %s (experiment=%s)", path, config.experiment.name)
    return config

"""
Probability-bound evaluators.

Every evaluator works in log space and returns a BoundValue: the raw bound (possibly inf),
its log, and the value clamped to [0, 1]. Preconditions raise DomainError carrying the
violated threshold.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Protocol, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from gtml.bounds.covers import CoverReport
from gtml.core.errors import DomainError, InputError
from gtml.markov.engine import ErgodicityCertificate

logger = logging.getLogger(__name__)

LOG_MAX = math.log(1.7976931348623157e308)


class MixingParameters(BaseModel):
    """beta(a, m) <= beta0 m^-gamma, s in (0, gamma), alpha the TV-Lipschitz constant of a -> pi_a."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    beta0: float = Field(1.0, ge=0)
    gamma: float = Field(2.0, ge=0)
    s: float = Field(0.5, gt=0)
    alpha: float = Field(0.0, ge=0)
    K: float = Field(1.0, gt=0)
    C1: float = Field(1.0, gt=0)
    C2: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _s_below_gamma(self):
        if not self.s < self.gamma:
            raise ValueError(f"s must lie in (0, gamma); got s={self.s}, gamma={self.gamma}")
        return self


@dataclass(frozen=True)
class BoundValue:
    value: float
    raw: float
    log_raw: float

    @classmethod
    def from_log(cls, log_raw: float) -> "BoundValue":
        raw = math.exp(log_raw) if log_raw < LOG_MAX else math.inf
        return cls(min(1.0, raw), raw, log_raw)


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise InputError(f"{name} must be positive, got {v}")


# === BEHAVIOR LEARNING ===

def behavior_threshold_parametric(eps: float, params: MixingParameters, n_b: int, n_h: int, cert: ErgodicityCertificate) -> float:
    return 2 * params.C1 * cert.N0 / (n_b ** 2 * n_h * cert.delta0 * eps)


def behavior_bound_parametric(T1: int, eps: float, params: MixingParameters, n_b: int, n_h: int, cert: ErgodicityCertificate) -> BoundValue:
    """2 exp(-(T1 eps |B|^2 |H| delta0 - 2 C1 N0)^2 / (2 T1 N0^2 C1^2))."""
    _check_positive(T1=T1, eps=eps, delta0=cert.delta0)
    threshold = behavior_threshold_parametric(eps, params, n_b, n_h, cert)
    if not T1 > threshold:
        raise DomainError(f"T1={T1} must exceed {threshold:.6g}", threshold=threshold)
    N0, C1 = cert.N0, params.C1
    gap = T1 * eps * n_b ** 2 * n_h * cert.delta0 - 2 * C1 * N0
    return BoundValue.from_log(math.log(2.0) - gap ** 2 / (2 * T1 * N0 ** 2 * C1 ** 2))


def behavior_threshold_nonparametric(eps: float, params: MixingParameters, n_b: int, n_h: int, cert: ErgodicityCertificate) -> float:
    return 2 * cert.N0 * (n_b + 1) / (n_b * n_h * cert.delta0 * params.C2 * eps)


def behavior_bound_nonparametric(T1: int, eps: float, params: MixingParameters, n_b: int, n_h: int, cert: ErgodicityCertificate) -> BoundValue:
    """2 |H| |B|^2 (|B|+1) exp(-(C2 T1 delta0 |B| |H| eps - 2 N0 (|B|+1))^2 / (2 T1 N0^2 (|B|+1)^2))."""
    _check_positive(T1=T1, eps=eps, delta0=cert.delta0)
    threshold = behavior_threshold_nonparametric(eps, params, n_b, n_h, cert)
    if not T1 > threshold:
        raise DomainError(f"T1={T1} must exceed {threshold:.6g}", threshold=threshold)
    N0 = cert.N0
    gap = params.C2 * T1 * cert.delta0 * n_b * n_h * eps - 2 * N0 * (n_b + 1)
    log_front = math.log(2.0 * n_h * n_b ** 2 * (n_b + 1))
    return BoundValue.from_log(log_front - gap ** 2 / (2 * T1 * N0 ** 2 * (n_b + 1) ** 2))


# === SECOND-LAYER COVERING NUMBERS ===

class CoveringProvider(Protocol):
    def log_n1(self, eps_prime: float, T2: int, part: int) -> float: ...


def pdim_covering_number(eps_prime: float, T2: int, K: float, n_b: int, pdim: int) -> float:
    """log of (e T2 K / eps')^(16 |B| Pdim), valid for T2 > 4 |B| Pdim."""
    _check_positive(eps_prime=eps_prime, K=K)
    threshold = 4 * n_b * pdim
    if not T2 > threshold:
        raise DomainError(f"T2={T2} must exceed 4|B|Pdim = {threshold}", threshold=threshold)
    return 16 * n_b * pdim * math.log(math.e * T2 * K / eps_prime)


@dataclass(frozen=True)
class PdimCoveringProvider:
    K: float
    n_b: int
    pdim: int

    def log_n1(self, eps_prime: float, T2: int, part: int) -> float:
        return pdim_covering_number(eps_prime, T2, self.K, self.n_b, self.pdim)


@dataclass(frozen=True)
class TableCoveringProvider:
    """User-supplied N1 values keyed by T2 (same for every partition cell), with an optional default."""

    values: Dict[int, float]
    default: Optional[float] = None

    def log_n1(self, eps_prime: float, T2: int, part: int) -> float:
        n1 = self.values.get(T2, self.default)
        if n1 is None:
            raise InputError(f"no covering number supplied for T2={T2}")
        if n1 < 1:
            raise InputError("covering numbers are at least 1")
        return math.log(n1)


# === MECHANISM LEARNING ===

def uniform_bound(
    T2: int,
    eps: float,
    delta: float,
    params: MixingParameters,
    covers: Union[CoverReport, int],
    provider: CoveringProvider,
) -> BoundValue:
    """
    N_dA(delta) max_i (16 N1((eps - K alpha delta)/16, T2) exp(-(eps - delta alpha K)^2 / (128 K^2)
    ceil(T2^(s/(1+s)) / 2)) + beta0 ceil(T2^((s - gamma)/(1+s)))).

    The ceiling in the mixing term is evaluated as written, so that term equals beta0 for T2 >= 1.
    """
    _check_positive(T2=T2, eps=eps)
    K, alpha = params.K, params.alpha
    if not delta > 0:
        raise DomainError(f"delta={delta} must be positive", threshold=0.0)
    if eps <= K * alpha * delta:
        threshold = eps / (K * alpha)
        raise DomainError(f"delta={delta} must be below eps/(K alpha) = {threshold:.6g}", threshold=threshold)
    if not 0 < params.s < params.gamma:
        raise DomainError(f"s={params.s} must lie in (0, gamma={params.gamma})", threshold=params.gamma)

    n_cover = covers.cardinality if isinstance(covers, CoverReport) else int(covers)
    if n_cover < 1:
        raise InputError("cover cardinality must be at least 1")
    margin = eps - K * alpha * delta
    blocks = math.ceil(T2 ** (params.s / (1 + params.s)) / 2)
    log_hoeffding = -(margin ** 2) / (128 * K ** 2) * blocks
    log_mixing = math.log(params.beta0) + math.log(math.ceil(T2 ** ((params.s - params.gamma) / (1 + params.s)))) if params.beta0 > 0 else -math.inf

    worst = -math.inf
    for part in range(n_cover):
        log_first = math.log(16.0) + provider.log_n1(margin / 16, T2, part) + log_hoeffding
        worst = max(worst, float(logsumexp([log_first, log_mixing])))
    return BoundValue.from_log(math.log(n_cover) + worst)


def dominant_log_term(
    T2: int,
    pdim: int,
    n_b: int,
    s: float,
    K: Optional[float] = None,
    eps_prime: Optional[float] = None,
    rate: Optional[float] = None,
) -> float:
    """
    log of the dominant T2 term T2^(16 |B| Pdim) exp(-T2^(s/(1+s))).

    With K, eps_prime and rate given the hidden constants are made explicit and the value is
    log(16 (e K T2 / eps')^(16 |B| Pdim)) - rate ceil(T2^(s/(1+s)) / 2).
    """
    power = 16 * n_b * pdim
    if K is None or eps_prime is None or rate is None:
        return power * math.log(T2) - T2 ** (s / (1 + s))
    return math.log(16.0) + power * math.log(math.e * K * T2 / eps_prime) - rate * math.ceil(T2 ** (s / (1 + s)) / 2)


# === TOTAL ===

@dataclass(frozen=True)
class TotalBound:
    value: float
    behavior: BoundValue
    mechanism: BoundValue
    eps1: float
    eps2: float


BehaviorBound = Callable[[int, float, MixingParameters, int, int, ErgodicityCertificate], BoundValue]


def split_eps(eps: float, K: float, C_M: float, split: float = 0.5):
    """eps = 2 K C eps1 + 2 eps2 with a fraction `split` given to the behavior term."""
    if not 0 < split < 1:
        raise DomainError(f"eps split {split} must lie in (0, 1)", threshold=split)
    if not eps > 0:
        raise DomainError(f"eps={eps} must be positive", threshold=0.0)
    if C_M < 0:
        raise DomainError(f"stability constant {C_M} must be non-negative", threshold=0.0)
    eps1 = math.inf if C_M == 0 else split * eps / (2 * K * C_M)
    eps2 = (1 - split) * eps / 2
    return eps1, eps2


def total_bound(
    T1: int,
    T2: int,
    eps: float,
    params: MixingParameters,
    n_b: int,
    n_h: int,
    cert: ErgodicityCertificate,
    delta: float,
    covers: Union[CoverReport, int],
    provider: CoveringProvider,
    C_M: float = 1.0,
    split: float = 0.5,
    method: str = "nonparametric",
) -> TotalBound:
    """Behavior bound at eps1 plus uniform bound at eps2, clamped to 1."""
    behavior_fn: BehaviorBound = {
        "nonparametric": behavior_bound_nonparametric,
        "parametric": behavior_bound_parametric,
    }.get(method)
    if behavior_fn is None:
        raise InputError(f"unknown behavior-learning method {method!r}")
    eps1, eps2 = split_eps(eps, params.K, C_M, split)
    behavior = BoundValue(0.0, 0.0, -math.inf) if math.isinf(eps1) else behavior_fn(T1, eps1, params, n_b, n_h, cert)
    mechanism = uniform_bound(T2, eps2, delta, params, covers, provider)
    raw = behavior.raw + mechanism.raw
    return TotalBound(min(1.0, raw), behavior, mechanism, eps1, eps2)

from .errors import ConfigError, ConvergenceError, DomainError, GtmlError, InputError, NotErgodicError, NumericalError
from .spaces import BehaviorSpace, SignalSpace, UserDistribution, UserSample
from .model import (
    BehaviorModel,
    LossFunction,
    MechanismSpace,
    ParameterMechanism,
    SignalFunction,
    Trajectory,
    Violation,
    sup_distance,
    validate_model,
)
from .environment import Environment, TabularEnvironment

"""Digital-twin-assisted reinforcement learning: twin domains that fan out
alternative actions and average multi-step rollouts into training targets."""

from .core import DomainId, Kind, Role, RngStream, StateVec, Transition, encode_discrete, transition_average
from .errors import TwinForgeError
from .trainer import EpisodeMetrics, Strategy, StrategyConfig, Trainer
from .twin import DigitalDomain, NoiseModel, TwinSpace, predict_target

__version__ = "0.1.0"

__all__ = [
    "DigitalDomain",
    "DomainId",
    "EpisodeMetrics",
    "Kind",
    "NoiseModel",
    "RngStream",
    "Role",
    "StateVec",
    "Strategy",
    "StrategyConfig",
    "Trainer",
    "Transition",
    "TwinForgeError",
    "TwinSpace",
    "encode_discrete",
    "predict_target",
    "transition_average",
]

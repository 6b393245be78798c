from .config import DqnConfig, ExperimentConfig, QlConfig, TwinConfig, load_config, parse_config, serialize_config
from .experiment import build_trainer, run_experiment, run_grid, run_seed
from .metrics import MetricsTable, compare_curves, episodes_to_fraction, moving_average

__all__ = [
    "DqnConfig",
    "ExperimentConfig",
    "MetricsTable",
    "QlConfig",
    "TwinConfig",
    "build_trainer",
    "compare_curves",
    "episodes_to_fraction",
    "load_config",
    "moving_average",
    "parse_config",
    "run_experiment",
    "run_grid",
    "run_seed",
    "serialize_config",
]

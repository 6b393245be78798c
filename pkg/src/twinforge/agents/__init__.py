from .dqn import DqnAgent, DqnParams
from .mlp import Adam, MlpParams, init_mlp, mlp_forward, mlp_train_step
from .params import AgentParams, copy_params, load_params, params_equal, save_params
from .replay import ReplayBuffer
from .tabular import EpsilonSchedule, QlAgent, QTable, ql_select, ql_update

__all__ = [
    "Adam",
    "AgentParams",
    "DqnAgent",
    "DqnParams",
    "EpsilonSchedule",
    "MlpParams",
    "QTable",
    "QlAgent",
    "ReplayBuffer",
    "copy_params",
    "init_mlp",
    "load_params",
    "mlp_forward",
    "mlp_train_step",
    "params_equal",
    "ql_select",
    "ql_update",
    "save_params",
]

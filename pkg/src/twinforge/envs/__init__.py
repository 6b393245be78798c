from .base import EnvSnapshot, Environment
from .toy import TabularMdp
from .uav import LinkBudget, UavConfig, UavEnv, friis_rate, uav_reward
from .urllc import AccessPoint, UrllcConfig, UrllcEnv

__all__ = [
    "AccessPoint",
    "EnvSnapshot",
    "Environment",
    "LinkBudget",
    "TabularMdp",
    "UavConfig",
    "UavEnv",
    "UrllcConfig",
    "UrllcEnv",
    "friis_rate",
    "uav_reward",
]

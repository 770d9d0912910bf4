from .nets import PolicyValueNets, select_action
from .rewards import RewardBreakdown, eda_sim_distance
from .state import QueryEncoder, StateEncoder
from .training import Hyperparams, a2c_train, train_loop

__all__ = [
    "PolicyValueNets",
    "select_action",
    "RewardBreakdown",
    "eda_sim_distance",
    "QueryEncoder",
    "StateEncoder",
    "Hyperparams",
    "a2c_train",
    "train_loop",
]

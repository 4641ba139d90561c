from .schedule import DiffusionSchedule, add_noise
from .dataset import DATASET_SCHEMA_VERSION, DemoEpisode, ReachDemoSet
from .policy import ReachPolicy, ReachPolicyConfig, init_policy, sample_chunk, train
from .executor import ReachTrace, execute_receding_horizon

__all__ = [
    "DATASET_SCHEMA_VERSION",
    "DemoEpisode",
    "DiffusionSchedule",
    "ReachDemoSet",
    "ReachPolicy",
    "ReachPolicyConfig",
    "ReachTrace",
    "add_noise",
    "execute_receding_horizon",
    "init_policy",
    "sample_chunk",
    "train",
]

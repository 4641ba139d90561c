from .baseline import TactileBaseline, WindowError, delta_tactile, estimate_baseline
from .grouping import (
    GROUPING_SCHEMA_VERSION,
    WRENCH_AXES,
    GroupConfig,
    GroupKey,
    build_group_config,
)
from .buffer import (
    BUFFER_SCHEMA_VERSION,
    BufferError,
    DualBuffer,
    Transition,
    label_mc_returns,
)

__all__ = [
    "BUFFER_SCHEMA_VERSION",
    "BufferError",
    "DualBuffer",
    "GROUPING_SCHEMA_VERSION",
    "GroupConfig",
    "GroupKey",
    "TactileBaseline",
    "Transition",
    "WRENCH_AXES",
    "WindowError",
    "build_group_config",
    "delta_tactile",
    "estimate_baseline",
    "label_mc_returns",
]

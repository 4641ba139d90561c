from .mlp import (
    Grads,
    MlpParams,
    ShapeError,
    StaleTapeError,
    Tape,
    backward,
    forward,
    init_mlp,
    zeros_like_params,
)
from .adam import AdamState, adam_scalar_step, adam_step, ema_update
from .policy_head import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    SampleCache,
    TanhGaussianHead,
    backprop_sample,
    log_prob_of,
    make_head,
    sample,
    sample_tanh_gaussian,
)
from .checkpoint import (
    CheckpointError,
    load_blob,
    params_from_entries,
    params_to_entries,
    save_blob,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "Grads",
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "MlpParams",
    "SampleCache",
    "ShapeError",
    "StaleTapeError",
    "TanhGaussianHead",
    "Tape",
    "adam_scalar_step",
    "adam_step",
    "backprop_sample",
    "backward",
    "ema_update",
    "forward",
    "init_mlp",
    "load_blob",
    "log_prob_of",
    "make_head",
    "params_from_entries",
    "params_to_entries",
    "sample",
    "sample_tanh_gaussian",
    "save_blob",
    "zeros_like_params",
]

from .observations import ActorObservation, CriticObservation, actor_obs_from_sim
from .agent import (
    MissingReturnsError,
    SacConfig,
    SacState,
    actor_update,
    batch_arrays,
    critic_input,
    critic_update,
    critic_warmup,
    fit_normalizer,
    init_sac,
    q_disagreement,
    q_values,
    select_action,
    temperature_update,
)

__all__ = [
    "ActorObservation",
    "CriticObservation",
    "MissingReturnsError",
    "SacConfig",
    "SacState",
    "actor_obs_from_sim",
    "actor_update",
    "batch_arrays",
    "critic_input",
    "critic_update",
    "critic_warmup",
    "fit_normalizer",
    "init_sac",
    "q_disagreement",
    "q_values",
    "select_action",
    "temperature_update",
]

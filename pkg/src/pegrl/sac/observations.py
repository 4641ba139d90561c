"""Observation containers enforcing the actor/critic asymmetry.

The actor's observation type has no field that could carry tactile data;
the critic's type wraps an actor observation and appends the
baseline-subtracted tactile delta. They are deliberately unrelated types so
a critic observation cannot be passed where an actor observation is
expected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ActorObservation:
    """What the action-generating policy sees: proprioception, the previous
    command, and noisy object-relative features (close-up peg-vs-hole pose
    plus the realized tip motion of the last step). Never tactile."""

    gripper_pose: np.ndarray  # (3,)
    prev_action: np.ndarray  # (3,)
    local_features: np.ndarray  # (5,): tip-vs-hole x, z, tilt, tip vx, vz

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.gripper_pose, self.prev_action, self.local_features]
        ).astype(np.float64)

    @staticmethod
    def dim() -> int:
        return 11


@dataclass
class CriticObservation:
    actor: ActorObservation
    tactile_delta: np.ndarray  # (3,), baseline-subtracted contact signal

    def __post_init__(self) -> None:
        self.tactile_delta = np.asarray(self.tactile_delta, dtype=np.float64)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.actor.vector(), self.tactile_delta])


def actor_obs_from_sim(sim_obs: np.ndarray, prev_action: np.ndarray) -> ActorObservation:
    """Project the simulator observation vector onto the actor's view."""
    return ActorObservation(
        gripper_pose=np.asarray(sim_obs[0:3], dtype=np.float64),
        prev_action=np.asarray(prev_action, dtype=np.float64),
        local_features=np.asarray(sim_obs[6:11], dtype=np.float64),
    )

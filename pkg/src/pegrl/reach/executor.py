"""Receding-horizon execution of the chunk policy against the simulator.

Samples a chunk, plays its first `replan_every` actions, then replans from
the fresh observation. The grip channel drives the grasp attempt; once
holding, motion goes through the contact-stepping path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim import SimState, grasp, move_gripper, observe, step


@dataclass
class ReachTrace:
    steps: int = 0
    grasped: bool = False
    reached: bool = False  # stop_when fired
    timeout: bool = False
    grasp_failures: int = 0
    endpoint: np.ndarray | None = None
    actions: list[np.ndarray] = field(default_factory=list)


def _obs_history(buffer: list[np.ndarray], depth: int) -> np.ndarray:
    hist = [buffer[max(0, len(buffer) - 1 - k)] for k in range(depth - 1, -1, -1)]
    return np.stack(hist)


def execute_receding_horizon(
    policy,
    state: SimState,
    replan_every: int,
    seed: int,
    stop_when=None,
    max_steps: int = 220,
    sample_fn=None,
) -> tuple[SimState, ReachTrace]:
    """Run the reach stage until stop_when(state) fires or steps run out.

    `sample_fn(policy, obs_history, seed)` defaults to the trained sampler;
    injectable for scripted tests.
    """
    from .policy import sample_chunk

    cfg = policy.config
    if replan_every < 1 or replan_every > cfg.horizon:
        raise ValueError("replan_every must be in [1, horizon]")
    sampler = sample_fn or sample_chunk
    rng = np.random.default_rng(seed)
    trace = ReachTrace()
    obs_buf = [observe(state)]

    while trace.steps < max_steps:
        hist = _obs_history(obs_buf, cfg.obs_history)
        chunk = sampler(policy, hist, seed=int(rng.integers(2**31)))
        for action in chunk[:replan_every]:
            motion, grip_cmd = action[:3], action[3]
            if not state.grasped:
                if grip_cmd > 0.5:
                    state, ok = grasp(state, seed=int(rng.integers(2**31)))
                    if ok:
                        trace.grasped = True
                    else:
                        trace.grasp_failures += 1
                        state = move_gripper(state, motion)
                else:
                    state = move_gripper(state, motion)
            else:
                state, _ = step(state, motion)
            trace.steps += 1
            trace.actions.append(np.asarray(action, dtype=np.float64))
            obs_buf.append(observe(state))
            if stop_when is not None and stop_when(state):
                trace.reached = True
                trace.endpoint = state.gripper_pose[:2].copy()
                return state, trace
            if trace.steps >= max_steps:
                break
    trace.timeout = True
    trace.endpoint = state.gripper_pose[:2].copy()
    return state, trace

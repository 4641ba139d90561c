"""Demonstration generation: scripted reach episodes for the chunk policy
and scripted insertion episodes that seed the demonstration replay buffer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..reach import DemoEpisode, ReachDemoSet
from ..replay import (
    DualBuffer,
    Transition,
    build_group_config,
    delta_tactile,
    estimate_baseline,
    label_mc_returns,
)
from ..sac import actor_obs_from_sim
from ..sim import SimConfig, grasp, move_gripper, observe, reset, step
from .scripted import DemonstratorParams, InsertScript, ReachScript

BASELINE_WINDOW = 25  # still steps after the grasp settles


def generate_reach_demos(
    sim_config: SimConfig,
    count: int = 100,
    seed: int = 777,
    params: DemonstratorParams | None = None,
    max_steps: int = 260,
) -> ReachDemoSet:
    """Scripted grasp-and-carry episodes with randomized spawn and hover."""
    params = params or DemonstratorParams()
    master = np.random.default_rng(seed)
    out = ReachDemoSet(geometry=sim_config.geometry.name)
    for k in range(count):
        ep_seed = int(master.integers(2**31))
        rng = np.random.default_rng(ep_seed)
        state = reset(sim_config, seed=ep_seed)
        spawn_x = float(state.peg_rest_pose[0])
        hover = float(rng.uniform(1.0, 3.0))
        script = ReachScript(params=params, hover_tip_z=hover, rng=rng)
        obs_list, act_list = [], []
        for _ in range(max_steps):
            o = observe(state).copy()
            a = script.action(state)
            obs_list.append(o)
            act_list.append(a)
            if not state.grasped and a[3] > 0.5:
                state, ok = grasp(state, seed=int(rng.integers(2**31)))
                if not ok:
                    state = move_gripper(state, a[:3])
            elif not state.grasped:
                state = move_gripper(state, a[:3])
            else:
                state, _ = step(state, a[:3])
            if script.done(state):
                break
        if not script.done(state):
            continue  # drop rare non-converging episodes
        out.episodes.append(
            DemoEpisode(
                obs=np.array(obs_list),
                actions=np.array(act_list),
                spawn_x=spawn_x,
                endpoint=state.gripper_pose[:2].copy(),
            )
        )
    return out


@dataclass
class InsertDemoEpisode:
    transitions: list[Transition] = field(default_factory=list)
    baseline: np.ndarray | None = None
    endpoint: np.ndarray | None = None
    success: bool = False
    peak_wrench: np.ndarray = field(default_factory=lambda: np.zeros(3))
    actor_obs_seq: list[np.ndarray] = field(default_factory=list)
    action_seq: list[np.ndarray] = field(default_factory=list)


@dataclass
class InsertDemoData:
    episodes: list[InsertDemoEpisode] = field(default_factory=list)

    def baselines(self):
        return [e.baseline for e in self.episodes]

    def success_rate(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.success for e in self.episodes) / len(self.episodes)

    def peak_force_norm(self) -> float:
        peaks = [float(np.hypot(e.peak_wrench[0], e.peak_wrench[1])) for e in self.episodes]
        return max(peaks, default=0.0)


def run_insert_demo_episode(
    sim_config: SimConfig,
    ep_seed: int,
    params: DemonstratorParams | None = None,
    max_insert_steps: int = 120,
    reach_max_steps: int = 260,
) -> InsertDemoEpisode | None:
    """One full grasp-to-insert scripted episode; None when the reach phase
    fails to converge."""
    params = params or DemonstratorParams()
    rng = np.random.default_rng(ep_seed)
    state = reset(sim_config, seed=ep_seed)
    script = ReachScript(params=params, hover_tip_z=float(rng.uniform(1.0, 3.0)), rng=rng)
    for _ in range(reach_max_steps):
        a = script.action(state)
        if not state.grasped and a[3] > 0.5:
            state, ok = grasp(state, seed=int(rng.integers(2**31)))
            if not ok:
                state = move_gripper(state, a[:3])
        elif not state.grasped:
            state = move_gripper(state, a[:3])
        else:
            state, _ = step(state, a[:3])
        if script.done(state):
            break
    if not script.done(state):
        return None

    ep = InsertDemoEpisode(endpoint=state.gripper_pose[:2].copy())
    stream = []
    for _ in range(BASELINE_WINDOW):
        state, res = step(state, (0.0, 0.0, 0.0))
        stream.append(res.raw_tactile)
    fb = estimate_baseline(stream, 0, BASELINE_WINDOW)
    ep.baseline = fb.as_array()

    prev_action = np.zeros(3)
    cur_delta = delta_tactile(stream[-1], fb).as_array()
    peak = np.zeros(3)
    script = InsertScript(params=params)
    for i in range(max_insert_steps):
        obs_vec = actor_obs_from_sim(observe(state), prev_action).vector()
        a = script.action(state)
        state, res = step(state, a)
        next_delta = delta_tactile(res.raw_tactile, fb).as_array()
        next_obs_vec = actor_obs_from_sim(observe(state), a).vector()
        cw = state.last_contact_wrench
        peak = np.maximum(peak, np.abs([cw.fx, cw.fz, cw.my]))
        ep.transitions.append(
            Transition(
                actor_obs=obs_vec,
                tactile_delta=cur_delta,
                action=a.copy(),
                reward=1.0 if res.success else 0.0,
                done=1.0 if res.success else 0.0,
                next_actor_obs=next_obs_vec,
                next_tactile_delta=next_delta,
                group_key=None,  # type: ignore[arg-type]  # assigned after binning
                intervened=False,
            )
        )
        ep.actor_obs_seq.append(obs_vec)
        ep.action_seq.append(a.copy())
        prev_action = a
        cur_delta = next_delta
        if res.success:
            ep.success = True
            break
    ep.peak_wrench = peak
    return ep


def generate_insert_demos(
    sim_config: SimConfig, count: int = 20, seed: int = 333, **kw
) -> InsertDemoData:
    master = np.random.default_rng(seed)
    data = InsertDemoData()
    attempts = 0
    while len(data.episodes) < count and attempts < count * 3:
        attempts += 1
        ep = run_insert_demo_episode(sim_config, int(master.integers(2**31)), **kw)
        if ep is not None:
            data.episodes.append(ep)
    return data


def build_demo_buffer(
    data: InsertDemoData,
    gamma: float = 0.99,
    axes: tuple[str, ...] = ("fx", "my"),
    bins: tuple[int, ...] = (2, 4),
    online_capacity: int | None = 50_000,
) -> DualBuffer:
    """Bin episode baselines, key every transition, label Monte-Carlo
    returns, and fill the demonstration side of a fresh dual buffer."""
    from ..sim import ContactWrench

    wrenches = [ContactWrench.from_array(b) for b in data.baselines()]
    group_config = build_group_config(wrenches, axes=axes, bins=bins)
    buf = DualBuffer(group_config=group_config, online_capacity=online_capacity)
    for ep, fb in zip(data.episodes, wrenches):
        key = group_config.group_of(fb)
        for t in ep.transitions:
            t.group_key = key
        label_mc_returns(ep.transitions, gamma=gamma)
        for t in ep.transitions:
            buf.insert(t, into="demo")
    return buf


def insert_demos_as_reach_set(data: InsertDemoData) -> ReachDemoSet:
    """Repackage insertion demos as (actor obs, action) episodes for
    training the imitation-only insertion policy."""
    out = ReachDemoSet(geometry="insert")
    for ep in data.episodes:
        if not ep.actor_obs_seq:
            continue
        out.episodes.append(
            DemoEpisode(
                obs=np.array(ep.actor_obs_seq),
                actions=np.array(ep.action_seq),
                spawn_x=0.0,
                endpoint=ep.endpoint.copy(),
            )
        )
    return out

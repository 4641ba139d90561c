"""Frozen-policy evaluation: fresh seeds, no interventions, no learning."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..reach import ReachPolicy, execute_receding_horizon, sample_chunk
from ..replay import delta_tactile, estimate_baseline
from ..sac import SacState, actor_obs_from_sim, select_action
from ..sim import SimConfig, observe, reset, step
from ..switching import SwitchRegion
from .demos import BASELINE_WINDOW

EVAL_SEED_BASE = 900_000


@dataclass
class EvalRow:
    successes: int = 0
    episodes: int = 0
    peak_fx: list[float] = field(default_factory=list)
    peak_fz: list[float] = field(default_factory=list)
    peak_my: list[float] = field(default_factory=list)
    success_flags: list[bool] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0

    def to_dict(self) -> dict:
        return {
            "successes": self.successes,
            "episodes": self.episodes,
            "rate": self.rate,
            "peak_fx": self.peak_fx,
            "peak_fz": self.peak_fz,
            "peak_my": self.peak_my,
            "success_flags": self.success_flags,
            "seeds": self.seeds,
        }


def _reach_to_region(reach_policy, state, region, replan_every, seed, max_steps):
    def in_region(s):
        return s.grasped and region.contains(s.gripper_pose[:2])

    return execute_receding_horizon(
        reach_policy, state, replan_every=replan_every, seed=seed,
        stop_when=in_region, max_steps=max_steps,
    )


def run_eval(
    sim_config: SimConfig,
    reach_policy: ReachPolicy,
    region: SwitchRegion,
    n_episodes: int,
    seed_base: int = EVAL_SEED_BASE,
    sac: SacState | None = None,
    il_insert_policy: ReachPolicy | None = None,
    max_insert_steps: int = 160,
    replan_every: int = 4,
    reach_max_steps: int = 220,
    record_path: str | Path | None = None,
) -> EvalRow:
    """Success row over fresh-seeded episodes for either the learner
    (deterministic actions) or the imitation-only insertion policy."""
    if (sac is None) == (il_insert_policy is None):
        raise ValueError("provide exactly one of sac / il_insert_policy")
    row = EvalRow()
    records = []
    for i in range(n_episodes):
        ep_seed = seed_base + i
        state = reset(sim_config, seed=ep_seed)
        state, trace = _reach_to_region(
            reach_policy, state, region, replan_every, ep_seed + 1, reach_max_steps
        )
        peak = np.zeros(3)
        success = False
        if trace.reached:
            stream = []
            for _ in range(BASELINE_WINDOW):
                state, res = step(state, (0.0, 0.0, 0.0))
                stream.append(res.raw_tactile)
            fb = estimate_baseline(stream, 0, BASELINE_WINDOW)
            prev_action = np.zeros(3)
            ep_rng = np.random.default_rng(ep_seed + 2)
            obs_buf = [observe(state)]
            k = 0
            while k < max_insert_steps:
                if sac is not None:
                    actor_obs = actor_obs_from_sim(observe(state), prev_action)
                    action = select_action(sac, actor_obs, "deterministic", ep_rng)
                    actions = [action]
                else:
                    hist_depth = il_insert_policy.config.obs_history
                    hist = [
                        actor_obs_from_sim(
                            obs_buf[max(0, len(obs_buf) - 1 - j)], prev_action
                        ).vector()
                        for j in range(hist_depth - 1, -1, -1)
                    ]
                    chunk = sample_chunk(
                        il_insert_policy, np.stack(hist), seed=int(ep_rng.integers(2**31))
                    )
                    actions = list(chunk[: max(1, replan_every // 2)])
                for action in actions:
                    state, res = step(state, action[:3])
                    cw = state.last_contact_wrench
                    peak = np.maximum(peak, np.abs([cw.fx, cw.fz, cw.my]))
                    prev_action = np.asarray(action[:3], dtype=np.float64)
                    obs_buf.append(observe(state))
                    k += 1
                    if res.success:
                        success = True
                        break
                    if k >= max_insert_steps:
                        break
                if success:
                    break
        row.episodes += 1
        row.successes += int(success)
        row.success_flags.append(success)
        row.seeds.append(ep_seed)
        row.peak_fx.append(float(peak[0]))
        row.peak_fz.append(float(peak[1]))
        row.peak_my.append(float(peak[2]))
        records.append(
            {
                "episode": i, "seed": ep_seed, "success": success,
                "reached": trace.reached, "peak_fx": float(peak[0]),
                "peak_fz": float(peak[1]), "peak_my": float(peak[2]),
            }
        )
    if record_path is not None:
        with open(record_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return row


def eval_from_run_dir(
    run_dir: str | Path, n_episodes: int, seed_base: int = EVAL_SEED_BASE
) -> EvalRow:
    """Evaluate the artifacts a training run left behind."""
    from .training import ExperimentConfig, make_sim_config

    run_dir = Path(run_dir)
    config = ExperimentConfig.load(run_dir / "run_meta.json")
    sim_config = make_sim_config(config)
    reach_policy = ReachPolicy.load(run_dir / "reach.ckpt")
    region_doc = json.loads((run_dir / "region.json").read_text())
    region = SwitchRegion.from_dict(region_doc["region"])
    sac = il = None
    if (run_dir / "sac.ckpt").exists():
        sac = SacState.load(run_dir / "sac.ckpt")
    else:
        il = ReachPolicy.load(run_dir / "il_insert.ckpt")
    return run_eval(
        sim_config, reach_policy, region, n_episodes, seed_base=seed_base,
        sac=sac, il_insert_policy=il,
        record_path=run_dir / f"eval_{seed_base}.jsonl",
    )

"""Two-stage training orchestrator.

Pipeline per run: scripted demos, switch-region construction, critic warmup
on Monte-Carlo-labeled demo returns, chunk-policy imitation for reaching,
then the online insertion loop: reach, record the tactile baseline over a
still window, switch inside the region, step the stochastic policy with
scripted (or human, via telemetry) interventions, store to the dual buffers,
and update the learner every few environment steps. Failure endpoints feed
back into the switch region between episodes.

All run state needed to continue training (learner, buffers, endpoints,
counters) is checkpointed at episode boundaries, so an interrupted run
resumes exactly. Episode/transition/update records land in append-only
JSONL files; reports are pure re-readers of those files.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..reach import ReachPolicy, ReachPolicyConfig, execute_receding_horizon
from ..reach import train as train_reach
from ..replay import DualBuffer, Transition, delta_tactile, estimate_baseline, label_mc_returns
from ..sac import (
    SacConfig,
    SacState,
    actor_obs_from_sim,
    actor_update,
    critic_update,
    critic_warmup,
    fit_normalizer,
    init_sac,
    q_disagreement,
    select_action,
    temperature_update,
)
from ..sim import SimConfig, default_config, observe, relocate_gripper, render_frame, reset, step
from ..switching import EndpointSet, SwitchRegion, update_region
from .demos import (
    BASELINE_WINDOW,
    InsertDemoData,
    build_demo_buffer,
    generate_insert_demos,
    generate_reach_demos,
    insert_demos_as_reach_set,
)
from .scripted import IntervenorConfig, ScriptedIntervenor

METHODS = ("il_only", "il_rl_vanilla", "il_rl_tactile_full")
RUN_SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    geometry: str = "square"
    clearance: float = 0.05
    method: str = "il_rl_tactile_full"
    seed: int = 0
    outdir: str = "runs/run0"

    # demonstrations
    reach_demo_count: int = 100
    insert_demo_count: int = 20
    reach_demo_seed: int = 777  # geometry-level, shared across methods/seeds
    reach_epochs: int = 200
    reach_batch: int = 64
    il_insert_epochs: int = 400

    # online training
    budget_transitions: int = 4000
    update_period: int = 1
    batch_size: int = 64
    warmup_steps: int = 200
    cta_ratio: int = 2
    gamma: float = 0.99
    tau: float = 0.005
    sac_hidden: tuple[int, ...] = (256, 256)
    attempts_per_episode: int = 2
    max_attempt_steps: int = 120
    reach_max_steps: int = 220
    replan_every: int = 4
    group_axes: tuple[str, ...] = ("fx", "my")
    group_bins: tuple[int, ...] = (2, 4)
    mad_k: float = 3.0
    safety_factor: float = 2.5  # intervenor force fence over demo peaks
    probe_batch: int = 64
    disagreement_every: int = 10
    checkpoint_every_episodes: int = 10
    group_sampling_override: bool | None = None  # isolate the sampler ablation

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @property
    def use_tactile(self) -> bool:
        return self.method == "il_rl_tactile_full"

    @property
    def group_uniform(self) -> bool:
        if self.group_sampling_override is not None:
            return self.group_sampling_override
        return self.method == "il_rl_tactile_full"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = RUN_SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("schema_version", None)
        for key in ("sac_hidden", "group_axes", "group_bins"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _JsonlWriter:
    def __init__(self, path: Path, append: bool = False):
        self._fh = open(path, "a" if append else "w", encoding="utf-8")

    def write(self, rec: dict) -> None:
        self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


@dataclass
class RunArtifacts:
    outdir: Path
    reach_policy_path: Path
    sac_path: Path | None
    il_insert_path: Path | None
    region: SwitchRegion
    episodes: int
    transitions: int
    successes: int


def make_sim_config(config: ExperimentConfig) -> SimConfig:
    return default_config(config.geometry, clearance_c=config.clearance)


def prepare_reach_policy(
    config: ExperimentConfig, sim_config: SimConfig, cache_path: str | Path | None = None
) -> tuple[ReachPolicy, list[np.ndarray]]:
    """Train (or reload) the reach chunk policy; returns it plus the demo
    endpoints that seed the switch region."""
    demos = generate_reach_demos(
        sim_config, count=config.reach_demo_count, seed=config.reach_demo_seed
    )
    if cache_path is not None and Path(cache_path).exists():
        return ReachPolicy.load(cache_path), demos.endpoints()
    policy = train_reach(
        demos,
        epochs=config.reach_epochs,
        batch=config.reach_batch,
        seed=config.reach_demo_seed + 1,
        config=ReachPolicyConfig(),
    )
    if cache_path is not None:
        policy.save(cache_path)
    return policy, demos.endpoints()


def _train_il_insert_policy(config: ExperimentConfig, data: InsertDemoData, outdir: Path) -> Path:
    il_set = insert_demos_as_reach_set(data)
    il_cfg = ReachPolicyConfig(horizon=4, action_bounds=(2.0, 2.0, 0.05))
    il_policy = train_reach(
        il_set, epochs=config.il_insert_epochs, batch=config.reach_batch,
        seed=config.seed + 17, config=il_cfg,
    )
    path = outdir / "il_insert.ckpt"
    il_policy.save(path)
    return path


class OnlineTrainer:
    """Owns the online-loop state so it can be checkpointed and resumed."""

    def __init__(
        self,
        config: ExperimentConfig,
        sim_config: SimConfig,
        sac: SacState,
        buffer: DualBuffer,
        endpoints: EndpointSet,
        intervenor_threshold: float,
        warm_final_loss: float,
    ):
        self.config = config
        self.sim_config = sim_config
        self.sac = sac
        self.buffer = buffer
        self.endpoints = endpoints
        self.region = update_region(endpoints, k=config.mad_k)
        self.intervenor = ScriptedIntervenor(
            config=IntervenorConfig(wrench_safety_threshold=intervenor_threshold)
        )
        self.warm_final_loss = warm_final_loss
        # fixed demo-drawn probe set: disagreement stays comparable across
        # sampler variants instead of reflecting each sampler's own batches
        probe_rng = np.random.default_rng(4242)
        self.probe = [buffer.demo.draw(probe_rng, False) for _ in range(config.probe_batch)]
        self.transitions_done = 0
        self.episode_idx = 0
        self.successes = 0
        self.update_counter = 0
        self.first_td_logged = False

    # -- persistence ----------------------------------------------------
    def save(self, outdir: Path) -> None:
        self.sac.save(outdir / "sac.ckpt")
        self.buffer.save(outdir / "buffer.jsonl")
        (outdir / "progress.json").write_text(
            json.dumps(
                {
                    "schema_version": RUN_SCHEMA_VERSION,
                    "transitions_done": self.transitions_done,
                    "episode_idx": self.episode_idx,
                    "successes": self.successes,
                    "update_counter": self.update_counter,
                    "first_td_logged": self.first_td_logged,
                    "intervenor_threshold": self.intervenor.config.wrench_safety_threshold,
                    "warm_final_loss": self.warm_final_loss,
                    "endpoints": self.endpoints.to_dict(),
                },
                sort_keys=True,
            )
        )
        (outdir / "region.json").write_text(
            json.dumps(
                {"region": self.region.to_dict(), "endpoints": self.endpoints.to_dict()},
                indent=2, sort_keys=True,
            )
        )

    @classmethod
    def restore(cls, config: ExperimentConfig, sim_config: SimConfig, outdir: Path) -> "OnlineTrainer":
        progress = json.loads((outdir / "progress.json").read_text())
        sac = SacState.load(outdir / "sac.ckpt")
        buffer = DualBuffer.load(outdir / "buffer.jsonl")
        endpoints = EndpointSet.from_dict(progress["endpoints"])
        trainer = cls(
            config, sim_config, sac, buffer, endpoints,
            intervenor_threshold=progress["intervenor_threshold"],
            warm_final_loss=progress["warm_final_loss"],
        )
        trainer.transitions_done = progress["transitions_done"]
        trainer.episode_idx = progress["episode_idx"]
        trainer.successes = progress["successes"]
        trainer.update_counter = progress["update_counter"]
        trainer.first_td_logged = progress["first_td_logged"]
        return trainer

    # -- learner updates -------------------------------------------------
    def _do_updates(self, metric_writer: _JsonlWriter) -> None:
        cfg = self.config
        for _ in range(cfg.cta_ratio):
            self.update_counter += 1
            batch = self.buffer.sample_batch(
                cfg.batch_size,
                seed=cfg.seed * 1_000_003 + self.update_counter,
                group_uniform=cfg.group_uniform,
            )
            m = critic_update(self.sac, batch, seed=self.update_counter)
        if not self.first_td_logged:
            metric_writer.write(
                {"phase": "online", "first_td_loss": m["critic_loss"],
                 "final_warmup_loss": self.warm_final_loss}
            )
            self.first_td_logged = True
        ma = actor_update(self.sac, batch, seed=self.update_counter)
        mt = temperature_update(self.sac, batch, seed=self.update_counter + 7)
        rec = {
            "phase": "online", "transition": self.transitions_done,
            "update": self.update_counter, "critic_loss": m["critic_loss"],
            "q_mean": m["q_mean"], "actor_loss": ma["actor_loss"], "alpha": mt["alpha"],
        }
        if self.update_counter % cfg.disagreement_every == 0:
            rec["q_disagreement"] = q_disagreement(self.sac, self.probe)
        metric_writer.write(rec)

    # -- one episode -----------------------------------------------------
    def run_episode(
        self,
        reach_policy: ReachPolicy,
        ep_writer: _JsonlWriter,
        tr_writer: _JsonlWriter,
        metric_writer: _JsonlWriter,
        telemetry=None,
    ) -> None:
        cfg = self.config
        ep_seed = 10_000 + cfg.seed * 1000 + self.episode_idx
        ep_index = self.episode_idx
        self.episode_idx += 1
        ep_rng = np.random.default_rng(ep_seed + 5)
        t_start = time.time()
        state = reset(self.sim_config, seed=ep_seed)

        region = self.region

        def in_region(s):
            return s.grasped and region.contains(s.gripper_pose[:2])

        state, trace = execute_receding_horizon(
            reach_policy, state, replan_every=cfg.replan_every,
            seed=ep_seed + 1, stop_when=in_region, max_steps=cfg.reach_max_steps,
        )
        if not trace.reached:
            ep_writer.write(
                {
                    "episode": ep_index, "seed": ep_seed,
                    "stage_result": "reach_timeout", "success": False,
                    "transitions": 0, "intervention_steps": 0, "steps": trace.steps,
                    "jammed_seen": False, "peak_fx": 0.0, "peak_fz": 0.0, "peak_my": 0.0,
                    "first_transition_index": self.transitions_done,
                    "zero_intervention_success": False,
                    "wall_clock": time.time() - t_start,
                }
            )
            return

        stream = []
        for _ in range(BASELINE_WINDOW):
            state, res = step(state, (0.0, 0.0, 0.0))
            stream.append(res.raw_tactile)
        fb = estimate_baseline(stream, 0, BASELINE_WINDOW)
        group_key = self.buffer.group_config.group_of(fb.wrench)

        self.intervenor.reset_episode()
        episode_transitions: list[Transition] = []
        ep_intervened = 0
        ep_success = False
        ep_jam_seen = False
        peak = np.zeros(3)
        human_takeover = False
        pending_label = None
        failure_resets = 0
        endpoint_appends = 0

        for attempt in range(cfg.attempts_per_episode):
            if ep_success or self.transitions_done >= cfg.budget_transitions:
                break
            if attempt > 0:
                if self.endpoints.fail:
                    target = self.endpoints.fail[int(ep_rng.integers(len(self.endpoints.fail)))]
                    relocate_gripper(state, target)
                    failure_resets += 1
            prev_action = np.zeros(3)
            cur_delta = delta_tactile(state.last_raw_tactile, fb).as_array()
            was_intervening = False
            for t in range(cfg.max_attempt_steps):
                if self.transitions_done >= cfg.budget_transitions:
                    break
                if telemetry is not None:
                    for cmd in telemetry.poll_commands():
                        kind = cmd.get("type")
                        if kind == "takeover_on":
                            human_takeover = True
                        elif kind == "takeover_off":
                            human_takeover = False
                        elif kind == "label":
                            pending_label = cmd.get("outcome")
                actor_obs = actor_obs_from_sim(observe(state), prev_action)
                intervened = False
                if telemetry is not None and human_takeover:
                    action = np.asarray(telemetry.latest_twist(), dtype=np.float64)
                    intervened = True
                else:
                    scripted = self.intervenor.action(state) if self.intervenor.engaged else None
                    if scripted is not None:
                        action = scripted
                        intervened = True
                    else:
                        action = select_action(self.sac, actor_obs, "stochastic", ep_rng)
                if intervened and not was_intervening and episode_transitions:
                    # the policy action that forced this takeover is a
                    # zero-reward terminal for the policy's own stream;
                    # otherwise triggering rescues becomes a value source
                    last = episode_transitions[-1]
                    if not last.intervened:
                        last.done = 1.0
                was_intervening = intervened
                state, res = step(state, action)
                self.intervenor.observe_step(state, res.jammed)
                ep_jam_seen = ep_jam_seen or res.jammed
                cw = state.last_contact_wrench
                peak = np.maximum(peak, np.abs([cw.fx, cw.fz, cw.my]))
                success = res.success
                if pending_label is not None:
                    success = pending_label == "success"
                    pending_label = None
                next_delta = delta_tactile(res.raw_tactile, fb).as_array()
                tr = Transition(
                    actor_obs=actor_obs.vector(),
                    tactile_delta=cur_delta,
                    action=np.asarray(action, dtype=np.float64).copy(),
                    reward=1.0 if success else 0.0,
                    done=1.0 if success else 0.0,
                    next_actor_obs=actor_obs_from_sim(observe(state), action).vector(),
                    next_tactile_delta=next_delta,
                    group_key=group_key,
                    intervened=intervened,
                )
                self.buffer.insert(tr, into="online")
                episode_transitions.append(tr)
                tr_writer.write(
                    {"i": self.transitions_done, "episode": ep_index,
                     "intervened": intervened, "success": bool(success)}
                )
                self.transitions_done += 1
                ep_intervened += int(intervened)
                prev_action = np.asarray(action, dtype=np.float64)
                cur_delta = next_delta

                if self.transitions_done % cfg.update_period == 0:
                    self._do_updates(metric_writer)

                if telemetry is not None:
                    telemetry.publish_frame(
                        render_frame(state, stage="insert"),
                        extra={
                            "tactile_delta": next_delta.tolist(),
                            "intervened": intervened,
                            "transition": self.transitions_done,
                        },
                    )
                if success:
                    ep_success = True
                    self.successes += 1
                    break
            if not ep_success:
                self.endpoints.add_failure(state.gripper_pose[:2])
                endpoint_appends += 1

        if episode_transitions:
            label_mc_returns(episode_transitions, gamma=cfg.gamma)
        self.region = update_region(self.endpoints, k=cfg.mad_k)  # between episodes
        ep_writer.write(
            {
                "episode": ep_index, "seed": ep_seed,
                "stage_result": "success" if ep_success else "fail",
                "success": ep_success,
                "transitions": len(episode_transitions),
                "intervention_steps": ep_intervened,
                "steps": trace.steps + BASELINE_WINDOW + len(episode_transitions),
                "jammed_seen": ep_jam_seen,
                "peak_fx": float(peak[0]), "peak_fz": float(peak[1]),
                "peak_my": float(peak[2]),
                "first_transition_index": self.transitions_done - len(episode_transitions),
                "zero_intervention_success": ep_success and ep_intervened == 0,
                "baseline": [fb.wrench.fx, fb.wrench.fz, fb.wrench.my],
                "group_key": list(group_key.indices),
                "failure_resets": failure_resets,
                "endpoint_appends": endpoint_appends,
                "wall_clock": time.time() - t_start,
            }
        )


def run_training(
    config: ExperimentConfig,
    reach_policy: ReachPolicy | None = None,
    reach_endpoints: list[np.ndarray] | None = None,
    insert_demo_data: InsertDemoData | None = None,
    telemetry=None,
    resume: bool = False,
) -> RunArtifacts:
    """Execute (or resume) one full training run, persisting everything
    under config.outdir. Pre-built reach policies / demo sets may be shared
    across runs that hold them fixed."""
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    sim_config = make_sim_config(config)
    (outdir / "run_meta.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    sim_config.save(outdir / "sim_config.json")

    reach_path = outdir / "reach.ckpt"
    if reach_policy is None or reach_endpoints is None:
        reach_policy, reach_endpoints = prepare_reach_policy(config, sim_config, cache_path=reach_path)
    if not reach_path.exists():
        reach_policy.save(reach_path)

    resuming = resume and (outdir / "progress.json").exists()
    ep_writer = _JsonlWriter(outdir / "episodes.jsonl", append=resuming)
    tr_writer = _JsonlWriter(outdir / "transitions.jsonl", append=resuming)
    metric_writer = _JsonlWriter(outdir / "metrics.jsonl", append=resuming)
    if not resuming:
        metric_writer.write({"phase": "setup", "tag": "reach_policy_ready"})

    il_insert_path = None
    sac_path = None

    if config.method == "il_only":
        if insert_demo_data is None:
            insert_demo_data = generate_insert_demos(
                sim_config, count=config.insert_demo_count, seed=1000 + config.seed
            )
        endpoints = EndpointSet(demo=[np.asarray(p) for p in reach_endpoints])
        region = update_region(endpoints, k=config.mad_k)
        il_insert_path = _train_il_insert_policy(config, insert_demo_data, outdir)
        (outdir / "region.json").write_text(
            json.dumps({"region": region.to_dict(), "endpoints": endpoints.to_dict()},
                       indent=2, sort_keys=True)
        )
        trainer_episodes = 0
        trainer_transitions = 0
        trainer_successes = 0
    else:
        if resuming:
            trainer = OnlineTrainer.restore(config, sim_config, outdir)
        else:
            if insert_demo_data is None:
                insert_demo_data = generate_insert_demos(
                    sim_config, count=config.insert_demo_count, seed=1000 + config.seed
                )
            buffer = build_demo_buffer(
                insert_demo_data, gamma=config.gamma,
                axes=config.group_axes, bins=config.group_bins,
            )
            metric_writer.write(
                {"phase": "setup", "tag": "demo_ingest", "demo_transitions": len(buffer.demo)}
            )
            endpoints = EndpointSet(demo=[np.asarray(p) for p in reach_endpoints])
            metric_writer.write(
                {"phase": "setup", "tag": "region_build", "n_demo_endpoints": len(endpoints.demo)}
            )
            sac = init_sac(
                SacConfig(
                    actor_obs_dim=11,
                    action_bounds=(
                        sim_config.max_step_translation,
                        sim_config.max_step_translation,
                        sim_config.max_step_rotation,
                    ),
                    tactile_dim=3 if config.use_tactile else 0,
                    hidden=config.sac_hidden,
                    gamma=config.gamma,
                    tau=config.tau,
                    cta_ratio=config.cta_ratio,
                ),
                seed=config.seed,
            )
            fit_normalizer(sac, buffer.demo.items)
            metric_writer.write({"phase": "setup", "tag": "critic_warmup"})
            warm_trace = critic_warmup(
                sac, buffer, steps=config.warmup_steps,
                batch_size=config.batch_size, seed=config.seed + 31,
            )
            for i, loss in enumerate(warm_trace):
                metric_writer.write({"phase": "warmup", "step": i, "critic_loss": loss})
            # floor keeps incidental wall brushes from tripping the fence
            # when the privileged demos were contact-free
            trainer = OnlineTrainer(
                config, sim_config, sac, buffer, endpoints,
                intervenor_threshold=max(
                    60.0, config.safety_factor * insert_demo_data.peak_force_norm()
                ),
                warm_final_loss=warm_trace[-1],
            )

        fruitless = 0
        while trainer.transitions_done < config.budget_transitions:
            before = trainer.transitions_done
            trainer.run_episode(reach_policy, ep_writer, tr_writer, metric_writer, telemetry)
            fruitless = fruitless + 1 if trainer.transitions_done == before else 0
            if fruitless >= 30:
                raise RuntimeError(
                    "30 consecutive episodes produced no insertion transitions; "
                    "the reach policy never delivers the peg into the switch region"
                )
            if trainer.episode_idx % config.checkpoint_every_episodes == 0:
                trainer.save(outdir)
        trainer.save(outdir)
        sac_path = outdir / "sac.ckpt"
        region = trainer.region
        trainer_episodes = trainer.episode_idx
        trainer_transitions = trainer.transitions_done
        trainer_successes = trainer.successes

    ep_writer.close()
    tr_writer.close()
    metric_writer.close()
    return RunArtifacts(
        outdir=outdir,
        reach_policy_path=reach_path,
        sac_path=sac_path,
        il_insert_path=il_insert_path,
        region=region,
        episodes=trainer_episodes,
        transitions=trainer_transitions,
        successes=trainer_successes,
    )

"""Soft actor-critic insertion learner.

Twin critics with min-backup targets, EMA target copies, automatic entropy
temperature, and a supervised warmup that regresses both critics onto
Monte-Carlo demonstration returns before any TD learning. Critic inputs are
[actor observation, tactile delta, action]; setting tactile_dim = 0 removes
the tactile extension (the vanilla ablation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import (
    AdamState,
    MlpParams,
    TanhGaussianHead,
    adam_scalar_step,
    adam_step,
    backprop_sample,
    backward,
    ema_update,
    forward,
    init_mlp,
    make_head,
    sample,
)
from ..nn.checkpoint import (
    load_blob,
    params_from_entries,
    params_to_entries,
    save_blob,
)
from ..replay.buffer import DualBuffer, Transition
from .observations import ActorObservation, CriticObservation


@dataclass
class SacConfig:
    actor_obs_dim: int = 11
    action_bounds: tuple[float, ...] = (2.0, 2.0, 0.05)
    tactile_dim: int = 3  # 0 disables the critic's tactile extension
    hidden: tuple[int, ...] = (256, 256)
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    init_alpha: float = 0.1
    target_entropy: float | None = None  # defaults to -len(action_bounds)
    cta_ratio: int = 2  # critic updates per actor update
    critic_layer_norm: bool = True  # keeps demo-heavy value learning bounded
    # sparse {0,1} terminal rewards put true returns in [0, 1]; clamping the
    # TD target to a slightly wider band blocks runaway overestimation
    q_clip: tuple[float, float] | None = (-0.5, 1.5)

    def __post_init__(self) -> None:
        if self.cta_ratio < 1:
            raise ValueError("cta_ratio must be >= 1")
        if self.init_alpha <= 0:
            raise ValueError("init_alpha must be > 0")
        if self.target_entropy is None:
            self.target_entropy = -float(len(self.action_bounds))

    @property
    def action_dim(self) -> int:
        return len(self.action_bounds)

    @property
    def critic_in_dim(self) -> int:
        return self.actor_obs_dim + self.tactile_dim + self.action_dim


@dataclass
class SacState:
    config: SacConfig
    actor: TanhGaussianHead
    critics: list[MlpParams]
    targets: list[MlpParams]
    actor_opt: AdamState
    critic_opts: list[AdamState]
    log_alpha: float
    alpha_m: float = 0.0
    alpha_v: float = 0.0
    alpha_steps: int = 0
    update_count: int = 0
    # input standardization (identity until fitted from demo data)
    obs_mu: np.ndarray = None  # type: ignore[assignment]
    obs_sigma: np.ndarray = None  # type: ignore[assignment]
    tact_mu: np.ndarray = None  # type: ignore[assignment]
    tact_sigma: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        cfg = self.config
        if self.obs_mu is None:
            self.obs_mu = np.zeros(cfg.actor_obs_dim)
        if self.obs_sigma is None:
            self.obs_sigma = np.ones(cfg.actor_obs_dim)
        if self.tact_mu is None:
            self.tact_mu = np.zeros(cfg.tactile_dim)
        if self.tact_sigma is None:
            self.tact_sigma = np.ones(cfg.tactile_dim)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    def norm_obs(self, obs: np.ndarray) -> np.ndarray:
        return (obs - self.obs_mu) / self.obs_sigma

    def norm_tact(self, tact: np.ndarray) -> np.ndarray:
        if self.config.tactile_dim == 0:
            return tact
        # winsorize: jam spikes are hundreds of demo sigmas; clamping keeps
        # the critic's tactile branch inside its trained range
        return np.clip((tact - self.tact_mu) / self.tact_sigma, -5.0, 5.0)

    def norm_act(self, act: np.ndarray) -> np.ndarray:
        return act / np.array(self.config.action_bounds)

    def save(self, path: str | Path) -> None:
        cfg = self.config
        entries = params_to_entries("actor", self.actor.trunk)
        for i in range(2):
            entries.update(params_to_entries(f"critic{i}", self.critics[i]))
            entries.update(params_to_entries(f"target{i}", self.targets[i]))
        for name, opt in [("actor", self.actor_opt)] + [
            (f"critic{i}", o) for i, o in enumerate(self.critic_opts)
        ]:
            entries[f"opt/{name}/step"] = opt.step
            for j, (mw, vw, mb, vb) in enumerate(
                zip(opt.m_weights, opt.v_weights, opt.m_biases, opt.v_biases)
            ):
                entries[f"opt/{name}/mw{j}"] = mw
                entries[f"opt/{name}/vw{j}"] = vw
                entries[f"opt/{name}/mb{j}"] = mb
                entries[f"opt/{name}/vb{j}"] = vb
            for j, (ml, vl) in enumerate(zip(opt.m_ln, opt.v_ln)):
                entries[f"opt/{name}/mln{j}"] = ml
                entries[f"opt/{name}/vln{j}"] = vl
        entries.update(
            {
                "obs_mu": self.obs_mu,
                "obs_sigma": self.obs_sigma,
                "tact_mu": self.tact_mu,
                "tact_sigma": self.tact_sigma,
                "log_alpha": self.log_alpha,
                "alpha_m": self.alpha_m,
                "alpha_v": self.alpha_v,
                "alpha_steps": self.alpha_steps,
                "update_count": self.update_count,
                "cfg/actor_obs_dim": cfg.actor_obs_dim,
                "cfg/action_bounds": np.array(cfg.action_bounds),
                "cfg/tactile_dim": cfg.tactile_dim,
                "cfg/hidden": np.array(cfg.hidden, dtype=np.float64),
                "cfg/gamma": cfg.gamma,
                "cfg/tau": cfg.tau,
                "cfg/lr_actor": cfg.lr_actor,
                "cfg/lr_critic": cfg.lr_critic,
                "cfg/lr_alpha": cfg.lr_alpha,
                "cfg/init_alpha": cfg.init_alpha,
                "cfg/target_entropy": cfg.target_entropy,
                "cfg/cta_ratio": cfg.cta_ratio,
                "cfg/critic_layer_norm": int(cfg.critic_layer_norm),
                "cfg/q_clip": np.array(
                    cfg.q_clip if cfg.q_clip is not None else [np.nan, np.nan]
                ),
            }
        )
        save_blob(path, entries)

    @classmethod
    def load(cls, path: str | Path) -> "SacState":
        e = load_blob(path)
        q_clip_raw = e.get("cfg/q_clip")
        q_clip = None
        if q_clip_raw is not None and np.all(np.isfinite(q_clip_raw)):
            q_clip = (float(q_clip_raw[0]), float(q_clip_raw[1]))
        cfg = SacConfig(
            actor_obs_dim=int(e["cfg/actor_obs_dim"]),
            action_bounds=tuple(float(b) for b in e["cfg/action_bounds"]),
            tactile_dim=int(e["cfg/tactile_dim"]),
            hidden=tuple(int(h) for h in e["cfg/hidden"]),
            gamma=float(e["cfg/gamma"]),
            tau=float(e["cfg/tau"]),
            lr_actor=float(e["cfg/lr_actor"]),
            lr_critic=float(e["cfg/lr_critic"]),
            lr_alpha=float(e["cfg/lr_alpha"]),
            init_alpha=float(e["cfg/init_alpha"]),
            target_entropy=float(e["cfg/target_entropy"]),
            cta_ratio=int(e["cfg/cta_ratio"]),
            critic_layer_norm=bool(e.get("cfg/critic_layer_norm", 0)),
            q_clip=q_clip,
        )
        state = cls(
            config=cfg,
            actor=TanhGaussianHead(
                trunk=params_from_entries("actor", e),
                bounds=np.array(cfg.action_bounds),
            ),
            critics=[params_from_entries(f"critic{i}", e) for i in range(2)],
            targets=[params_from_entries(f"target{i}", e) for i in range(2)],
            actor_opt=None,  # type: ignore[arg-type]
            critic_opts=None,  # type: ignore[arg-type]
            log_alpha=float(e["log_alpha"]),
            alpha_m=float(e["alpha_m"]),
            alpha_v=float(e["alpha_v"]),
            alpha_steps=int(e["alpha_steps"]),
            update_count=int(e["update_count"]),
            obs_mu=e["obs_mu"],
            obs_sigma=e["obs_sigma"],
            tact_mu=e["tact_mu"],
            tact_sigma=e["tact_sigma"],
        )
        state.actor_opt = AdamState.for_params(state.actor.trunk, lr=cfg.lr_actor)
        state.critic_opts = [
            AdamState.for_params(c, lr=cfg.lr_critic) for c in state.critics
        ]
        for name, opt in [("actor", state.actor_opt)] + [
            (f"critic{i}", o) for i, o in enumerate(state.critic_opts)
        ]:
            if f"opt/{name}/step" not in e:
                continue
            opt.step = int(e[f"opt/{name}/step"])
            for j in range(len(opt.m_weights)):
                opt.m_weights[j][:] = e[f"opt/{name}/mw{j}"]
                opt.v_weights[j][:] = e[f"opt/{name}/vw{j}"]
                opt.m_biases[j][:] = e[f"opt/{name}/mb{j}"]
                opt.v_biases[j][:] = e[f"opt/{name}/vb{j}"]
            for j in range(len(opt.m_ln)):
                opt.m_ln[j][:] = e[f"opt/{name}/mln{j}"]
                opt.v_ln[j][:] = e[f"opt/{name}/vln{j}"]
        return state


def init_sac(config: SacConfig, seed: int = 0, init_std: float = 0.3) -> SacState:
    actor = make_head(
        config.actor_obs_dim,
        bounds=np.array(config.action_bounds),
        hidden=config.hidden,
        seed=seed,
    )
    # start exploration at a moderate, state-independent std instead of the
    # raw init's ~1.0, which would slam actions against the bounds
    d = config.action_dim
    actor.trunk.weights[-1][:, d:] *= 0.01
    actor.trunk.biases[-1][d:] = np.log(init_std)
    critics = [
        init_mlp(
            [config.critic_in_dim, *config.hidden, 1],
            seed=seed + 1 + i,
            layer_norm=config.critic_layer_norm,
        )
        for i in range(2)
    ]
    targets = [c.copy() for c in critics]
    return SacState(
        config=config,
        actor=actor,
        critics=critics,
        targets=targets,
        actor_opt=AdamState.for_params(actor.trunk, lr=config.lr_actor),
        critic_opts=[AdamState.for_params(c, lr=config.lr_critic) for c in critics],
        log_alpha=float(np.log(config.init_alpha)),
    )


class MissingReturnsError(RuntimeError):
    """Warmup requires Monte-Carlo return labels on demo transitions."""


def batch_arrays(sac: SacState, batch: list[Transition]) -> dict:
    """Stack transition fields in normalized network units; tactile columns
    are dropped when the critic has no tactile extension."""
    td = sac.config.tactile_dim
    obs = np.stack([t.actor_obs for t in batch])
    nobs = np.stack([t.next_actor_obs for t in batch])
    tact = (
        np.stack([t.tactile_delta for t in batch])[:, :td]
        if td
        else np.zeros((len(batch), 0))
    )
    ntact = (
        np.stack([t.next_tactile_delta for t in batch])[:, :td]
        if td
        else np.zeros((len(batch), 0))
    )
    return {
        "obs": sac.norm_obs(obs),
        "act": sac.norm_act(np.stack([t.action for t in batch])),
        "tact": sac.norm_tact(tact),
        "next_obs": sac.norm_obs(nobs),
        "next_tact": sac.norm_tact(ntact),
        "rew": np.array([t.reward for t in batch]),
        "done": np.array([t.done for t in batch]),
    }


def fit_normalizer(sac: SacState, transitions: list[Transition]) -> None:
    """Standardize network inputs from demonstration statistics."""
    obs = np.stack([t.actor_obs for t in transitions])
    sac.obs_mu = obs.mean(axis=0)
    sac.obs_sigma = np.maximum(obs.std(axis=0), 1e-3)
    td = sac.config.tactile_dim
    if td:
        tact = np.stack([t.tactile_delta for t in transitions])[:, :td]
        sac.tact_mu = tact.mean(axis=0)
        sac.tact_sigma = np.maximum(tact.std(axis=0), 1e-3)


def critic_input(obs: np.ndarray, tact: np.ndarray, act: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, tact, act], axis=1)


def q_values(params: MlpParams, obs, tact, act) -> np.ndarray:
    out, _ = forward(params, critic_input(obs, tact, act))
    return out[:, 0]


def select_action(
    sac: SacState,
    obs: ActorObservation,
    mode: str = "stochastic",
    rng: np.random.Generator | int = 0,
) -> np.ndarray:
    """Policy action from an actor observation. The type gate plus a runtime
    check keep tactile data out of the actor's input."""
    if isinstance(obs, CriticObservation):
        raise TypeError("actor must not receive tactile-bearing observations")
    if not isinstance(obs, ActorObservation):
        raise TypeError(f"expected ActorObservation, got {type(obs).__name__}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    vec = obs.vector()
    assert vec.shape == (sac.config.actor_obs_dim,)
    action, _, _ = sample(
        sac.actor, sac.norm_obs(vec), rng, deterministic=(mode == "deterministic")
    )
    return action


def critic_warmup(
    sac: SacState,
    buffer: DualBuffer,
    steps: int = 200,
    batch_size: int = 64,
    seed: int = 0,
) -> list[float]:
    """Regress both critics onto stored Monte-Carlo returns, then sync the
    target copies. Returns the per-step loss trace."""
    if any(t.mc_return is None for t in buffer.demo.items):
        raise MissingReturnsError("demo transitions lack mc_return labels")
    rng = np.random.default_rng(seed)
    trace = []
    n = len(buffer.demo)
    if n == 0:
        raise MissingReturnsError("demo buffer is empty")
    for _ in range(steps):
        idx = rng.integers(n, size=batch_size)
        batch = [buffer.demo.items[int(i)] for i in idx]
        arr = batch_arrays(sac, batch)
        g = np.array([t.mc_return for t in batch])
        x = critic_input(arr["obs"], arr["tact"], arr["act"])
        losses = []
        for params, opt in zip(sac.critics, sac.critic_opts):
            q, tape = forward(params, x)
            resid = q[:, 0] - g
            losses.append(float(np.mean(resid**2)))
            grads = backward(tape, (2.0 * resid / len(resid))[:, None])
            adam_step(params, grads, opt)
        trace.append(float(np.mean(losses)))
    sac.targets = [c.copy() for c in sac.critics]
    return trace


def critic_update(sac: SacState, batch: list[Transition], seed: int = 0) -> dict:
    """One TD step on both critics against the min-target backup."""
    cfg = sac.config
    arr = batch_arrays(sac, batch)
    rng = np.random.default_rng(seed)
    next_act, next_logp, _ = sample(sac.actor, arr["next_obs"], rng)
    next_act_n = sac.norm_act(next_act)
    tq = np.minimum(
        q_values(sac.targets[0], arr["next_obs"], arr["next_tact"], next_act_n),
        q_values(sac.targets[1], arr["next_obs"], arr["next_tact"], next_act_n),
    )
    y = arr["rew"] + cfg.gamma * (1.0 - arr["done"]) * (tq - sac.alpha * next_logp)
    if cfg.q_clip is not None:
        y = np.clip(y, cfg.q_clip[0], cfg.q_clip[1])
    x = critic_input(arr["obs"], arr["tact"], arr["act"])
    losses, qs = [], []
    for params, opt in zip(sac.critics, sac.critic_opts):
        q, tape = forward(params, x)
        resid = q[:, 0] - y
        losses.append(float(np.mean(resid**2)))
        qs.append(q[:, 0])
        grads = backward(tape, (2.0 * resid / len(resid))[:, None])
        adam_step(params, grads, opt)
    for target, online in zip(sac.targets, sac.critics):
        ema_update(target, online, cfg.tau)
    sac.update_count += 1
    return {
        "critic_loss": float(np.mean(losses)),
        "q_mean": float(np.mean(qs)),
        "y_mean": float(np.mean(y)),
        "batch_disagreement": float(np.mean(np.abs(qs[0] - qs[1]))),
    }


def actor_update(sac: SacState, batch: list[Transition], seed: int = 0) -> dict:
    """Reparameterized policy step against min(Q1, Q2); critics are frozen."""
    cfg = sac.config
    arr = batch_arrays(sac, batch)
    rng = np.random.default_rng(seed)
    b = len(batch)
    act, logp, cache = sample(sac.actor, arr["obs"], rng)
    x = critic_input(arr["obs"], arr["tact"], sac.norm_act(act))
    q_list, tapes = [], []
    for params in sac.critics:
        q, tape = forward(params, x)
        q_list.append(q[:, 0])
        tapes.append(tape)
    q1, q2 = q_list
    # gradient flows only through the per-sample argmin critic
    take_first = (q1 <= q2).astype(np.float64)
    dq = np.zeros((b, x.shape[1]))
    for k, tape in enumerate(tapes):
        mask = take_first if k == 0 else 1.0 - take_first
        g = backward(tape, (-mask / b)[:, None])
        dq += g.wrt_input
    # chain through the action normalization back to physical units
    dloss_daction = dq[:, -cfg.action_dim :] / np.array(cfg.action_bounds)
    grads = backprop_sample(
        sac.actor,
        cache,
        dloss_dlogprob=np.full(b, sac.alpha / b),
        dloss_daction=dloss_daction,
    )
    adam_step(sac.actor.trunk, grads, sac.actor_opt)
    loss = float(np.mean(sac.alpha * logp - np.minimum(q1, q2)))
    return {"actor_loss": loss, "entropy_estimate": float(-np.mean(logp)),
            "logp_mean": float(np.mean(logp))}


def temperature_update(sac: SacState, batch: list[Transition], seed: int = 0) -> dict:
    """Adam step on log(alpha), pushing policy entropy toward the target."""
    cfg = sac.config
    arr = batch_arrays(sac, batch)
    rng = np.random.default_rng(seed)
    _, logp, _ = sample(sac.actor, arr["obs"], rng)
    grad = -float(np.mean(logp + cfg.target_entropy))
    sac.alpha_steps += 1
    sac.log_alpha, sac.alpha_m, sac.alpha_v = adam_scalar_step(
        sac.log_alpha, grad, sac.alpha_m, sac.alpha_v, sac.alpha_steps, cfg.lr_alpha
    )
    return {"alpha": sac.alpha, "alpha_grad": grad}


def q_disagreement(sac: SacState, batch: list[Transition]) -> float:
    """Mean absolute gap between the twin critics on the batch."""
    arr = batch_arrays(sac, batch)
    q1 = q_values(sac.critics[0], arr["obs"], arr["tact"], arr["act"])
    q2 = q_values(sac.critics[1], arr["obs"], arr["tact"], arr["act"])
    return float(np.mean(np.abs(q1 - q2)))

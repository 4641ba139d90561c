"""Conditional denoising generator over action chunks.

An MLP predicts the injected noise from (flattened observation history,
one-hot diffusion step, noisy normalized chunk); sampling runs the ancestral
reverse process from Gaussian noise. One policy is trained per hole
geometry.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import AdamState, MlpParams, adam_step, backward, forward, init_mlp
from ..nn.checkpoint import (
    load_blob,
    params_from_entries,
    params_to_entries,
    save_blob,
)
from .dataset import ReachDemoSet
from .schedule import DiffusionSchedule, add_noise


@dataclass
class ReachPolicyConfig:
    horizon: int = 8
    obs_history: int = 2
    num_steps: int = 16
    hidden: tuple[int, ...] = (256, 256)
    lr: float = 1e-3
    beta_start: float = 0.02
    beta_end: float = 0.6
    action_bounds: tuple[float, ...] = (2.0, 2.0, 0.05, 1.0)  # dx, dz, dtheta, grip


@dataclass
class ReachPolicy:
    config: ReachPolicyConfig
    eps_net: MlpParams
    schedule: DiffusionSchedule
    obs_mean: np.ndarray
    obs_std: np.ndarray
    train_losses: list[float] = field(default_factory=list)

    @property
    def action_dim(self) -> int:
        return len(self.config.action_bounds)

    @property
    def chunk_dim(self) -> int:
        return self.config.horizon * self.action_dim

    def norm_obs(self, cond: np.ndarray) -> np.ndarray:
        return (cond - self.obs_mean) / self.obs_std

    def norm_actions(self, chunk: np.ndarray) -> np.ndarray:
        """Map raw chunks to [-1, 1]; the grip channel maps {0,1} -> {-1,1}."""
        bounds = np.array(self.config.action_bounds)
        flat = chunk.reshape(-1, self.action_dim)
        out = flat / bounds
        out[:, -1] = 2.0 * flat[:, -1] - 1.0
        return out.reshape(chunk.shape)

    def denorm_actions(self, chunk: np.ndarray) -> np.ndarray:
        bounds = np.array(self.config.action_bounds)
        flat = chunk.reshape(-1, self.action_dim)
        out = flat * bounds
        out[:, -1] = (flat[:, -1] + 1.0) / 2.0
        return out.reshape(chunk.shape)

    def _net_input(self, cond_n: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        onehot = np.zeros((len(x), self.config.num_steps))
        onehot[np.arange(len(x)), np.asarray(t) - 1] = 1.0
        return np.concatenate([cond_n, onehot, x], axis=1)

    def predict_eps(self, cond_n: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        out, _ = forward(self.eps_net, self._net_input(cond_n, t, x))
        return out

    def save(self, path: str | Path) -> None:
        entries = params_to_entries("eps_net", self.eps_net)
        entries.update(
            {
                "obs_mean": self.obs_mean,
                "obs_std": self.obs_std,
                "betas": self.schedule.betas,
                "cfg/horizon": self.config.horizon,
                "cfg/obs_history": self.config.obs_history,
                "cfg/num_steps": self.config.num_steps,
                "cfg/hidden": np.array(self.config.hidden, dtype=np.float64),
                "cfg/lr": self.config.lr,
                "cfg/beta_start": self.config.beta_start,
                "cfg/beta_end": self.config.beta_end,
                "cfg/action_bounds": np.array(self.config.action_bounds),
            }
        )
        save_blob(path, entries)

    @classmethod
    def load(cls, path: str | Path) -> "ReachPolicy":
        e = load_blob(path)
        cfg = ReachPolicyConfig(
            horizon=int(e["cfg/horizon"]),
            obs_history=int(e["cfg/obs_history"]),
            num_steps=int(e["cfg/num_steps"]),
            hidden=tuple(int(h) for h in e["cfg/hidden"]),
            lr=float(e["cfg/lr"]),
            beta_start=float(e["cfg/beta_start"]),
            beta_end=float(e["cfg/beta_end"]),
            action_bounds=tuple(float(b) for b in e["cfg/action_bounds"]),
        )
        return cls(
            config=cfg,
            eps_net=params_from_entries("eps_net", e),
            schedule=DiffusionSchedule.linear(cfg.num_steps, cfg.beta_start, cfg.beta_end),
            obs_mean=e["obs_mean"],
            obs_std=e["obs_std"],
        )


def init_policy(
    obs_dim: int, config: ReachPolicyConfig | None = None, seed: int = 0
) -> ReachPolicy:
    cfg = config or ReachPolicyConfig()
    chunk_dim = cfg.horizon * len(cfg.action_bounds)
    cond_dim = cfg.obs_history * obs_dim
    sizes = [cond_dim + cfg.num_steps + chunk_dim, *cfg.hidden, chunk_dim]
    return ReachPolicy(
        config=cfg,
        eps_net=init_mlp(sizes, seed=seed),
        schedule=DiffusionSchedule.linear(cfg.num_steps, cfg.beta_start, cfg.beta_end),
        obs_mean=np.zeros(cond_dim),
        obs_std=np.ones(cond_dim),
    )


def train(
    dataset: ReachDemoSet,
    epochs: int = 200,
    batch: int = 64,
    seed: int = 0,
    config: ReachPolicyConfig | None = None,
) -> ReachPolicy:
    """Noise-prediction regression over sliding-window chunks."""
    if len(dataset) == 0:
        raise ValueError("empty demonstration set")
    cfg = config or ReachPolicyConfig()
    policy = init_policy(dataset.obs_dim, cfg, seed=seed)
    conds, chunks = dataset.windows(cfg.horizon, cfg.obs_history)
    policy.obs_mean = conds.mean(axis=0)
    policy.obs_std = np.maximum(conds.std(axis=0), 1e-6)
    conds_n = policy.norm_obs(conds)
    chunks_n = policy.norm_actions(chunks)

    rng = np.random.default_rng(seed)
    opt = AdamState.for_params(policy.eps_net, lr=cfg.lr)
    n = len(conds_n)
    for epoch in range(epochs):
        # cosine decay to 10% of the base rate over the run
        frac = epoch / max(epochs - 1, 1)
        opt.lr = cfg.lr * (0.1 + 0.45 * (1.0 + np.cos(np.pi * frac)))
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch):
            idx = order[lo : lo + batch]
            x0 = chunks_n[idx]
            t = rng.integers(1, cfg.num_steps + 1, size=len(idx))
            eps = rng.standard_normal(x0.shape)
            ab = np.array([policy.schedule.abar(int(ti)) for ti in t])[:, None]
            xt = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
            net_in = policy._net_input(conds_n[idx], t, xt)
            pred, tape = forward(policy.eps_net, net_in)
            resid = pred - eps
            loss = float(np.mean(resid**2))
            grads = backward(tape, 2.0 * resid / resid.size)
            adam_step(policy.eps_net, grads, opt)
            losses.append(loss)
        policy.train_losses.append(float(np.mean(losses)))
    return policy


def sample_chunk(
    policy: ReachPolicy,
    obs_history: np.ndarray,
    seed: int,
    eps_fn=None,
    deterministic: bool = False,
) -> np.ndarray:
    """Reverse-process draw of one (horizon, action_dim) chunk.

    `eps_fn(cond_n, t, x)` overrides the learned noise predictor (used by
    analytic oracles); `deterministic` suppresses the per-step noise
    injection.
    """
    cfg = policy.config
    sched = policy.schedule
    rng = np.random.default_rng(seed)
    cond_n = policy.norm_obs(np.asarray(obs_history).ravel())[None, :]
    predict = eps_fn if eps_fn is not None else policy.predict_eps
    x = rng.standard_normal((1, policy.chunk_dim))
    for t in range(cfg.num_steps, 0, -1):
        eps_hat = predict(cond_n, np.array([t]), x)
        ab_t = sched.abar(t)
        ab_prev = sched.abar(t - 1)
        alpha_t = 1.0 - sched.betas[t - 1]
        beta_t = sched.betas[t - 1]
        # posterior mean over the clipped implied clean chunk; normalized
        # actions live in [-1, 1], so clipping only removes impossible states
        x0_hat = np.clip((x - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t), -1.0, 1.0)
        coef_x0 = np.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
        coef_xt = np.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
        x = coef_x0 * x0_hat + coef_xt * x
        if t > 1 and not deterministic:
            sigma = np.sqrt((1.0 - ab_prev) / (1.0 - ab_t) * beta_t)
            x = x + sigma * rng.standard_normal(x.shape)
    chunk_n = np.clip(x[0], -1.0, 1.0)
    chunk = policy.denorm_actions(chunk_n.reshape(cfg.horizon, policy.action_dim))
    return chunk

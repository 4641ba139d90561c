"""Tanh-squashed Gaussian policy head.

A trunk MLP emits (mean, log-std) per action dimension; actions are
``bounds * tanh(mean + std * xi)`` so they stay strictly inside the bounds.
Log-probabilities include the tanh change-of-variables term, computed in a
form that stays finite for saturated actions.

The gradient helpers implement the reparameterized chain rule by hand:
with ``u = mu + sigma * xi`` at fixed noise ``xi``,

    d logpi / d mu     = 2 tanh(u)
    d logpi / d logstd = -1 + 2 tanh(u) * sigma * xi
    d a / d mu         = bounds * (1 - tanh(u)^2)
    d a / d logstd     = bounds * (1 - tanh(u)^2) * sigma * xi

(the Gaussian-density terms cancel once u is substituted).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import Grads, MlpParams, ShapeError, Tape, backward, forward, init_mlp

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class TanhGaussianHead:
    trunk: MlpParams
    bounds: np.ndarray  # positive scale per action dimension

    def __post_init__(self) -> None:
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if self.trunk.out_dim != 2 * self.bounds.shape[0]:
            raise ShapeError(
                f"trunk output {self.trunk.out_dim} != 2 x action dim {self.bounds.shape[0]}"
            )
        if np.any(self.bounds <= 0):
            raise ValueError("action bounds must be strictly positive")

    @property
    def action_dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.trunk.in_dim

    def copy(self) -> "TanhGaussianHead":
        return TanhGaussianHead(trunk=self.trunk.copy(), bounds=self.bounds.copy())


def make_head(obs_dim: int, bounds: np.ndarray, hidden: tuple[int, ...], seed: int) -> TanhGaussianHead:
    bounds = np.asarray(bounds, dtype=np.float64)
    sizes = [obs_dim, *hidden, 2 * bounds.shape[0]]
    return TanhGaussianHead(trunk=init_mlp(sizes, seed=seed), bounds=bounds)


@dataclass
class SampleCache:
    """Everything needed to push gradients back through a sampled batch."""

    tape: Tape
    xi: np.ndarray
    sigma: np.ndarray
    tanh_u: np.ndarray
    clamp_gate: np.ndarray  # 1 where log-std was inside the clamp range


def _log1m_tanh2(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)); finite for any u
    x = -2.0 * u
    softplus = np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)
    return 2.0 * (np.log(2.0) - u - softplus)


def _split(head: TanhGaussianHead, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = head.action_dim
    mu = raw[:, :d]
    log_std_raw = raw[:, d:]
    log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
    gate = ((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)).astype(np.float64)
    return mu, log_std, gate


def sample(
    head: TanhGaussianHead,
    obs: np.ndarray,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> tuple[np.ndarray, np.ndarray, SampleCache]:
    """Draw actions and exact log-probs; returns a cache for backprop.

    `obs` may be a single vector or a batch; actions follow suit, log_prob is
    per sample.
    """
    single = np.asarray(obs).ndim == 1
    raw, tape = forward(head.trunk, obs)
    raw2 = raw[None, :] if single else raw
    mu, log_std, gate = _split(head, raw2)
    sigma = np.exp(log_std)
    xi = np.zeros_like(mu) if deterministic else rng.standard_normal(mu.shape)
    u = mu + sigma * xi
    # keep actions strictly inside the bounds even when tanh saturates
    tanh_u = np.clip(np.tanh(u), -1.0 + 1e-9, 1.0 - 1e-9)
    action = head.bounds * tanh_u
    log_prob = np.sum(
        -0.5 * xi * xi - log_std - _HALF_LOG_2PI - np.log(head.bounds) - _log1m_tanh2(u),
        axis=1,
    )
    cache = SampleCache(tape=tape, xi=xi, sigma=sigma, tanh_u=tanh_u, clamp_gate=gate)
    if single:
        return action[0], float(log_prob[0]), cache
    return action, log_prob, cache


def sample_tanh_gaussian(
    head: TanhGaussianHead, obs: np.ndarray, seed: int
) -> tuple[np.ndarray, np.ndarray | float]:
    """Seeded convenience wrapper around `sample` (stochastic mode)."""
    action, log_prob, _ = sample(head, obs, np.random.default_rng(seed))
    return action, log_prob


def log_prob_of(
    mu: np.ndarray, sigma: np.ndarray, bounds: np.ndarray, action: np.ndarray
) -> np.ndarray:
    """Density of given actions under (mu, sigma); diagnostic / oracle use.

    Actions must be strictly inside the bounds.
    """
    a = np.atleast_2d(np.asarray(action, dtype=np.float64))
    mu = np.atleast_2d(mu)
    sigma = np.atleast_2d(sigma)
    t = np.clip(a / bounds, -1.0 + 1e-12, 1.0 - 1e-12)
    u = np.arctanh(t)
    z = (u - mu) / sigma
    return np.sum(
        -0.5 * z * z - np.log(sigma) - _HALF_LOG_2PI - np.log(bounds) - _log1m_tanh2(u),
        axis=1,
    )


def backprop_sample(
    head: TanhGaussianHead,
    cache: SampleCache,
    dloss_dlogprob: np.ndarray,
    dloss_daction: np.ndarray | None = None,
) -> Grads:
    """Gradients of a loss built from sampled (action, log_prob) pairs.

    `dloss_dlogprob` is (batch,), `dloss_daction` is (batch, action_dim) or
    None when the loss does not touch the action directly.
    """
    c1 = np.asarray(dloss_dlogprob, dtype=np.float64)[:, None]
    tanh_u = cache.tanh_u
    dtanh = 1.0 - tanh_u * tanh_u
    sx = cache.sigma * cache.xi
    g_mu = c1 * (2.0 * tanh_u)
    g_ell = c1 * (-1.0 + 2.0 * tanh_u * sx)
    if dloss_daction is not None:
        da = np.asarray(dloss_daction, dtype=np.float64)
        through_a = da * head.bounds * dtanh
        g_mu = g_mu + through_a
        g_ell = g_ell + through_a * sx
    g_ell = g_ell * cache.clamp_gate
    return backward(cache.tape, np.concatenate([g_mu, g_ell], axis=1))

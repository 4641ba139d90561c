"""Adam optimizer state and updates, plus EMA target-network blending."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mlp import Grads, MlpParams, ShapeError


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a parameter set."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)
    m_ln: list[np.ndarray] = field(default_factory=list)
    v_ln: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 3e-4, **kw) -> "AdamState":
        st = cls(lr=lr, **kw)
        st.m_weights = [np.zeros_like(w) for w in params.weights]
        st.v_weights = [np.zeros_like(w) for w in params.weights]
        st.m_biases = [np.zeros_like(b) for b in params.biases]
        st.v_biases = [np.zeros_like(b) for b in params.biases]
        ln_params = params.ln_gains + params.ln_shifts
        st.m_ln = [np.zeros_like(p) for p in ln_params]
        st.v_ln = [np.zeros_like(p) for p in ln_params]
        return st


def adam_scalar_step(
    value: float, grad: float, m: float, v: float, step: int,
    lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
) -> tuple[float, float, float]:
    """One Adam update of a lone scalar; returns (value, m, v).

    `step` is the post-increment counter (1 on the first call).
    """
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return value, m, v


def adam_step(params: MlpParams, grads: Grads, state: AdamState) -> None:
    """Standard Adam update applied in place; increments the step counter."""
    if len(grads.weights) != len(params.weights):
        raise ShapeError("gradient layer count does not match parameters")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    ln_params = params.ln_gains + params.ln_shifts
    ln_grads = grads.ln_gains + grads.ln_shifts
    for p, g, m, v in (
        list(zip(params.weights, grads.weights, state.m_weights, state.v_weights))
        + list(zip(params.biases, grads.biases, state.m_biases, state.v_biases))
        + list(zip(ln_params, ln_grads, state.m_ln, state.v_ln))
    ):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def ema_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Blend target toward online: target <- (1 - tau) * target + tau * online."""
    if [w.shape for w in target.weights] != [w.shape for w in online.weights]:
        raise ShapeError("target/online shapes differ")
    pairs = (
        list(zip(target.weights, online.weights))
        + list(zip(target.biases, online.biases))
        + list(zip(target.ln_gains, online.ln_gains))
        + list(zip(target.ln_shifts, online.ln_shifts))
    )
    for tp, op in pairs:
        tp *= 1.0 - tau
        tp += tau * op
    return target

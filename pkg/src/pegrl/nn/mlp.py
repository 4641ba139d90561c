"""Plain fully-connected networks with a hand-written backward pass.

Everything here operates on float64 numpy arrays. There is no general
autodiff graph: the forward pass records exactly the intermediates that the
fixed MLP topology needs, and `backward` replays them in reverse. This keeps
the numeric core small enough to audit and to verify against finite
differences.

Hidden layers optionally apply layer normalization (with learned gain and
shift) between the linear map and the activation; value networks trained on
demonstration-heavy replay need it to keep their extrapolations bounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh")
_LN_EPS = 1e-6


class ShapeError(ValueError):
    """Array shape does not match the network definition."""


class StaleTapeError(RuntimeError):
    """A backward pass was requested for a tape that does not match."""


@dataclass
class MlpParams:
    """Weights and biases of a feed-forward network.

    ``weights[i]`` has shape (fan_in, fan_out); hidden layers use
    ``activation``, the output layer is linear. With ``layer_norm`` enabled,
    hidden layers normalize pre-activations and apply learned gain/shift.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    init_seed: int | None = None
    layer_norm: bool = False
    ln_gains: list[np.ndarray] = field(default_factory=list)
    ln_shifts: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights/biases length mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} vs bias {b.shape}")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeError(
                    f"layer {i}: fan-in {w.shape[0]} does not chain from "
                    f"previous fan-out {self.weights[i - 1].shape[1]}"
                )
        if self.layer_norm:
            n_hidden = len(self.weights) - 1
            if not self.ln_gains:
                self.ln_gains = [np.ones(w.shape[1]) for w in self.weights[:-1]]
                self.ln_shifts = [np.zeros(w.shape[1]) for w in self.weights[:-1]]
            if len(self.ln_gains) != n_hidden or len(self.ln_shifts) != n_hidden:
                raise ShapeError("layer-norm parameter count must match hidden layers")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            init_seed=self.init_seed,
            layer_norm=self.layer_norm,
            ln_gains=[g.copy() for g in self.ln_gains],
            ln_shifts=[s.copy() for s in self.ln_shifts],
        )

    def flat(self) -> np.ndarray:
        """All parameters concatenated; handy for oracle-style diffs."""
        return np.concatenate(
            [a.ravel() for a in self.weights + self.biases + self.ln_gains + self.ln_shifts]
        )


@dataclass
class _LayerRecord:
    post: np.ndarray  # layer output (after activation for hidden layers)
    x_hat: np.ndarray | None = None  # normalized pre-activation
    inv_std: np.ndarray | None = None  # 1 / sqrt(var + eps), per row


@dataclass
class Tape:
    """Intermediates recorded by `forward`, consumed once by `backward`."""

    params: MlpParams
    inputs: np.ndarray
    layers: list[_LayerRecord] = field(default_factory=list)
    used: bool = False


@dataclass
class Grads:
    """Parameter gradients plus the gradient w.r.t. the network input."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    wrt_input: np.ndarray
    ln_gains: list[np.ndarray] = field(default_factory=list)
    ln_shifts: list[np.ndarray] = field(default_factory=list)

    def scaled(self, factor: float) -> "Grads":
        return Grads(
            weights=[g * factor for g in self.weights],
            biases=[g * factor for g in self.biases],
            wrt_input=self.wrt_input * factor,
            ln_gains=[g * factor for g in self.ln_gains],
            ln_shifts=[g * factor for g in self.ln_shifts],
        )


def init_mlp(
    sizes: list[int], seed: int, activation: str = "relu", layer_norm: bool = False
) -> MlpParams:
    """Fan-in-scaled uniform initialization, U(-1/sqrt(fan_in), +1/sqrt(fan_in)).

    The seed is recorded on the result so checkpoints stay reconstructible.
    """
    if len(sizes) < 2:
        raise ShapeError("need at least input and output sizes")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=(fan_out,)))
    return MlpParams(
        weights=weights, biases=biases, activation=activation,
        init_seed=seed, layer_norm=layer_norm,
    )


def zeros_like_params(params: MlpParams) -> Grads:
    return Grads(
        weights=[np.zeros_like(w) for w in params.weights],
        biases=[np.zeros_like(b) for b in params.biases],
        wrt_input=np.zeros((1, params.in_dim)),
        ln_gains=[np.zeros_like(g) for g in params.ln_gains],
        ln_shifts=[np.zeros_like(s) for s in params.ln_shifts],
    )


def _as_batch(x: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{what}: expected (*, {dim}), got {x.shape}")
    return x, single


def forward(params: MlpParams, inputs: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run the network; returns output and the tape needed by `backward`.

    Accepts a single vector or a (batch, dim) matrix; the output matches.
    """
    x, single = _as_batch(inputs, params.in_dim, "forward input")
    tape = Tape(params=params, inputs=x)
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        rec = _LayerRecord(post=z)
        if i < last:
            if params.layer_norm:
                mu = z.mean(axis=1, keepdims=True)
                var = z.var(axis=1, keepdims=True)
                inv_std = 1.0 / np.sqrt(var + _LN_EPS)
                x_hat = (z - mu) * inv_std
                z = x_hat * params.ln_gains[i] + params.ln_shifts[i]
                rec.x_hat = x_hat
                rec.inv_std = inv_std
            h = np.maximum(z, 0.0) if params.activation == "relu" else np.tanh(z)
        else:
            h = z
        rec.post = h
        tape.layers.append(rec)
    out = h[0] if single else h
    return out, tape


def backward(tape: Tape, output_grad: np.ndarray) -> Grads:
    """Exact reverse-mode gradients for a recorded forward pass.

    Returns per-layer weight/bias (and layer-norm) gradients and the
    gradient w.r.t. the input batch. The tape is single-use.
    """
    if tape.used:
        raise StaleTapeError("tape already consumed by a previous backward")
    tape.used = True
    params = tape.params
    g, _ = _as_batch(output_grad, params.out_dim, "output grad")
    if g.shape[0] != tape.inputs.shape[0]:
        raise ShapeError(
            f"output grad batch {g.shape[0]} != forward batch {tape.inputs.shape[0]}"
        )
    n_layers = len(params.weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    g_ln_g = [np.zeros_like(x) for x in params.ln_gains]
    g_ln_s = [np.zeros_like(x) for x in params.ln_shifts]
    delta = g
    for i in range(n_layers - 1, -1, -1):
        below = tape.inputs if i == 0 else tape.layers[i - 1].post
        if i < n_layers - 1:
            rec = tape.layers[i]
            h = rec.post
            if params.activation == "relu":
                delta = delta * (h > 0.0)
            else:
                delta = delta * (1.0 - h * h)
            if params.layer_norm:
                x_hat, inv_std = rec.x_hat, rec.inv_std
                g_ln_g[i] = np.sum(delta * x_hat, axis=0)
                g_ln_s[i] = np.sum(delta, axis=0)
                d_xhat = delta * params.ln_gains[i]
                delta = inv_std * (
                    d_xhat
                    - d_xhat.mean(axis=1, keepdims=True)
                    - x_hat * np.mean(d_xhat * x_hat, axis=1, keepdims=True)
                )
        gw[i] = below.T @ delta
        gb[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T
    return Grads(weights=gw, biases=gb, wrt_input=delta, ln_gains=g_ln_g, ln_shifts=g_ln_s)

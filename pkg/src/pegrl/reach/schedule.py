"""Forward-process noise schedule for the action-chunk denoiser."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiffusionSchedule:
    betas: np.ndarray  # per-step noise levels, strictly increasing in (0, 1)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or len(b) < 1:
            raise ValueError("betas: need a 1-D schedule")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("betas: must lie strictly inside (0, 1)")
        if np.any(np.diff(b) <= 0):
            raise ValueError("betas: must strictly increase")
        self.betas = b
        self.alpha_bar = np.cumprod(1.0 - b)
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar: must strictly decrease")

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def abar(self, t: int) -> float:
        """Cumulative signal retention at step t; t=0 returns 1 (identity)."""
        if t < 0 or t > self.num_steps:
            raise ValueError(f"diffusion step {t} outside [0, {self.num_steps}]")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    @classmethod
    def linear(cls, num_steps: int = 16, beta_start: float = 0.02, beta_end: float = 0.6):
        return cls(betas=np.linspace(beta_start, beta_end, num_steps))


def add_noise(
    schedule: DiffusionSchedule, chunk: np.ndarray, t: int, noise: np.ndarray
) -> np.ndarray:
    """Forward process: sqrt(abar_t) * chunk + sqrt(1 - abar_t) * noise."""
    ab = schedule.abar(t)
    return np.sqrt(ab) * np.asarray(chunk) + np.sqrt(1.0 - ab) * np.asarray(noise)

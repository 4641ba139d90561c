"""Post-grasp tactile baseline estimation and baseline-relative deltas.

Raw hand-sensor readings carry a grasp-dependent static offset: where the
peg sits in the hand changes the load the sensor sees before any contact.
Averaging a short still window right after the grasp captures that offset;
subtracting it leaves only contact-induced signal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.state import ContactWrench


class WindowError(ValueError):
    """Baseline window does not fit the recorded stream."""


@dataclass
class TactileBaseline:
    wrench: ContactWrench
    window: int
    start_index: int

    def as_array(self) -> np.ndarray:
        return self.wrench.as_array()


def estimate_baseline(
    wrench_stream: list[ContactWrench], start_index: int, window: int
) -> TactileBaseline:
    """Per-component mean over stream[start_index : start_index + window].

    The robot must be commanded still over that window; the caller owns that
    protocol.
    """
    if window < 1:
        raise WindowError(f"window must be >= 1, got {window}")
    if start_index < 0 or start_index + window > len(wrench_stream):
        raise WindowError(
            f"window [{start_index}, {start_index + window}) exceeds stream "
            f"of length {len(wrench_stream)}"
        )
    block = np.stack(
        [w.as_array() for w in wrench_stream[start_index : start_index + window]]
    )
    mean = block.mean(axis=0)
    if not np.all(np.isfinite(mean)):
        raise WindowError("non-finite values in baseline window")
    return TactileBaseline(
        wrench=ContactWrench.from_array(mean), window=window, start_index=start_index
    )


def delta_tactile(raw: ContactWrench, baseline: TactileBaseline) -> ContactWrench:
    """Componentwise raw - baseline; isolates contact-induced variation."""
    return raw - baseline.wrench

"""Location-based handoff between the reaching and inserting policies.

The switch region is the axis-aligned bounding box of the demonstration
endpoints plus those insertion-failure endpoints that survive MAD-based
outlier rejection. Membership uses the closed box, so a point exactly on a
face counts as inside. The box is rebuilt between episodes only; within an
episode it is an immutable snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EndpointSet:
    """Demo endpoints are frozen after ingestion; failure endpoints only
    ever grow."""

    demo: list[np.ndarray] = field(default_factory=list)
    fail: list[np.ndarray] = field(default_factory=list)

    def add_failure(self, p) -> None:
        self.fail.append(np.asarray(p, dtype=np.float64).copy())

    def to_dict(self) -> dict:
        return {
            "demo": [p.tolist() for p in self.demo],
            "fail": [p.tolist() for p in self.fail],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EndpointSet":
        return cls(
            demo=[np.asarray(p, dtype=np.float64) for p in d["demo"]],
            fail=[np.asarray(p, dtype=np.float64) for p in d["fail"]],
        )


@dataclass
class SwitchRegion:
    lo: np.ndarray
    hi: np.ndarray
    mad_multiplier: float

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def to_dict(self) -> dict:
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "mad_multiplier": self.mad_multiplier,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SwitchRegion":
        return cls(
            lo=np.asarray(d["lo"], dtype=np.float64),
            hi=np.asarray(d["hi"], dtype=np.float64),
            mad_multiplier=float(d["mad_multiplier"]),
        )


def update_region(endpoints: EndpointSet, k: float = 3.0) -> SwitchRegion:
    """AABB over demo endpoints and MAD-filtered failure endpoints.

    Per axis, a failure point is rejected when its distance to the median of
    the pooled (demo + failure) values exceeds k times the pooled MAD.
    Rejection never applies to demo points.
    """
    if not endpoints.demo:
        raise ValueError("update_region: no demo endpoints")
    demo = np.stack(endpoints.demo)
    if endpoints.fail:
        fail = np.stack(endpoints.fail)
        pooled = np.concatenate([demo, fail], axis=0)
        med = np.median(pooled, axis=0)
        mad = np.median(np.abs(pooled - med), axis=0)
        keep = np.all(np.abs(fail - med) <= k * mad, axis=1)
        survivors = fail[keep]
        pts = np.concatenate([demo, survivors], axis=0) if len(survivors) else demo
    else:
        pts = demo
    return SwitchRegion(lo=pts.min(axis=0), hi=pts.max(axis=0), mad_multiplier=k)


def indicator(region: SwitchRegion, p) -> int:
    """1 when the hand position is inside the (closed) switch box."""
    return 1 if region.contains(p) else 0


def dispatch(region: SwitchRegion, p, reach_policy, insert_policy, obs):
    """Invoke exactly one of the two policies based on position.

    Returns (action, stage) with stage in {"reach", "insert"}.
    """
    if indicator(region, p):
        return insert_policy(obs), "insert"
    return reach_policy(obs), "reach"

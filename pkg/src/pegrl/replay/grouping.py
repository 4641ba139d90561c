"""Discretizing tactile baselines into replay groups.

Transitions are keyed by which bin their episode's post-grasp baseline
falls into, axis by axis. Bin edges come from the empirical range of the
demonstration baselines; values outside that range clamp into the first or
last bin so the group count stays fixed. A value exactly on an interior
edge belongs to the upper bin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.state import ContactWrench

WRENCH_AXES = ("fx", "fz", "my")
GROUPING_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GroupKey:
    indices: tuple[int, ...]

    def __str__(self) -> str:
        return "g" + "x".join(str(i) for i in self.indices)


@dataclass
class GroupConfig:
    axes: tuple[str, ...]
    bins: tuple[int, ...]
    edges: list[np.ndarray]  # per axis, bins+1 ascending values incl. outer bounds

    def __post_init__(self) -> None:
        if len(self.axes) != len(self.bins) or len(self.axes) != len(self.edges):
            raise ValueError("axes, bins and edges must align")
        for ax in self.axes:
            if ax not in WRENCH_AXES:
                raise ValueError(f"unknown wrench axis {ax!r}")
        for ax, n, e in zip(self.axes, self.bins, self.edges):
            if n < 1:
                raise ValueError(f"{ax}: need at least one bin")
            e = np.asarray(e, dtype=np.float64)
            if e.shape != (n + 1,):
                raise ValueError(f"{ax}: expected {n + 1} edges, got {e.shape}")
            if not np.all(np.diff(e) > 0):
                raise ValueError(f"{ax}: edges must strictly increase")

    @property
    def n_groups(self) -> int:
        return int(np.prod(self.bins))

    def group_of(self, baseline: ContactWrench) -> GroupKey:
        idx = []
        for ax, n, edges in zip(self.axes, self.bins, self.edges):
            value = getattr(baseline, ax)
            # interior edges only; out-of-range values clamp to the end bins,
            # a value exactly on an edge goes to the upper bin
            k = int(np.searchsorted(edges[1:-1], value, side="right"))
            idx.append(k)
        return GroupKey(tuple(idx))

    def all_keys(self) -> list[GroupKey]:
        keys = [()]
        for n in self.bins:
            keys = [k + (i,) for k in keys for i in range(n)]
        return [GroupKey(k) for k in keys]

    def to_dict(self) -> dict:
        return {
            "schema_version": GROUPING_SCHEMA_VERSION,
            "axes": list(self.axes),
            "bins": list(self.bins),
            "edges": [e.tolist() for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupConfig":
        if d.get("schema_version") != GROUPING_SCHEMA_VERSION:
            raise ValueError(f"schema_version: unsupported {d.get('schema_version')!r}")
        return cls(
            axes=tuple(d["axes"]),
            bins=tuple(d["bins"]),
            edges=[np.asarray(e, dtype=np.float64) for e in d["edges"]],
        )


def build_group_config(
    baselines: list[ContactWrench],
    axes: tuple[str, ...] = ("fx", "my"),
    bins: tuple[int, ...] = (2, 4),
) -> GroupConfig:
    """Uniform per-axis partition of the empirical [min, max] of the data."""
    if not baselines:
        raise ValueError("need at least one baseline to place bin edges")
    edges = []
    for ax, n in zip(axes, bins):
        vals = np.array([getattr(b, ax) for b in baselines], dtype=np.float64)
        lo, hi = float(vals.min()), float(vals.max())
        if hi - lo < 1e-9:  # degenerate range: widen symmetrically
            lo, hi = lo - 0.5, hi + 0.5
        edges.append(np.linspace(lo, hi, n + 1))
    return GroupConfig(axes=tuple(axes), bins=tuple(bins), edges=edges)

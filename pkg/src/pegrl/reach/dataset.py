"""Reach demonstration storage and chunk windowing.

Episodes hold per-step observations and actions. Training pairs are built
by a sliding window: the observation history is front-padded by repeating
the first frame, the action chunk is edge-padded by repeating the last
action near the episode end.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATASET_SCHEMA_VERSION = 1


@dataclass
class DemoEpisode:
    obs: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T, action_dim)
    spawn_x: float
    endpoint: np.ndarray  # terminal hand position (x, z)

    def __post_init__(self) -> None:
        if len(self.obs) != len(self.actions):
            raise ValueError("episode obs/actions length mismatch")
        if len(self.obs) == 0:
            raise ValueError("empty episode")


@dataclass
class ReachDemoSet:
    episodes: list[DemoEpisode] = field(default_factory=list)
    geometry: str = "square"

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def obs_dim(self) -> int:
        return self.episodes[0].obs.shape[1]

    @property
    def action_dim(self) -> int:
        return self.episodes[0].actions.shape[1]

    def spawn_positions(self) -> np.ndarray:
        return np.array([e.spawn_x for e in self.episodes])

    def endpoints(self) -> list[np.ndarray]:
        return [e.endpoint.copy() for e in self.episodes]

    def windows(self, horizon: int, obs_history: int) -> tuple[np.ndarray, np.ndarray]:
        """(conditions, chunks): flattened obs histories and action chunks."""
        conds, chunks = [], []
        for ep in self.episodes:
            T = len(ep.obs)
            for t in range(T):
                hist = [ep.obs[max(0, t - k)] for k in range(obs_history - 1, -1, -1)]
                idx = np.minimum(np.arange(t, t + horizon), T - 1)
                conds.append(np.concatenate(hist))
                chunks.append(ep.actions[idx].ravel())
        return np.array(conds), np.array(chunks)

    def action_stats(self) -> tuple[np.ndarray, np.ndarray]:
        acts = np.concatenate([e.actions for e in self.episodes])
        return acts.mean(axis=0), acts.std(axis=0)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "schema_version": DATASET_SCHEMA_VERSION,
                        "geometry": self.geometry,
                        "episodes": len(self.episodes),
                    }
                )
                + "\n"
            )
            for ep in self.episodes:
                fh.write(
                    json.dumps(
                        {
                            "obs": ep.obs.tolist(),
                            "actions": ep.actions.tolist(),
                            "spawn_x": ep.spawn_x,
                            "endpoint": ep.endpoint.tolist(),
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "ReachDemoSet":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("schema_version") != DATASET_SCHEMA_VERSION:
                raise ValueError(
                    f"schema_version: unsupported {header.get('schema_version')!r}"
                )
            out = cls(geometry=header["geometry"])
            for line in fh:
                d = json.loads(line)
                out.episodes.append(
                    DemoEpisode(
                        obs=np.asarray(d["obs"], dtype=np.float64),
                        actions=np.asarray(d["actions"], dtype=np.float64),
                        spawn_x=float(d["spawn_x"]),
                        endpoint=np.asarray(d["endpoint"], dtype=np.float64),
                    )
                )
        return out

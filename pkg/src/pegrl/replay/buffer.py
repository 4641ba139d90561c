"""Dual replay buffers with group-indexed, half-and-half sampling.

A demonstration buffer (never evicts; also receives intervention
transitions) and an online buffer (FIFO eviction at capacity). Batches take
ceil(n/2) from demo and floor(n/2) from online. With group-uniform sampling
each draw first picks a non-empty tactile group uniformly, then a
transition uniformly inside it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grouping import GroupConfig, GroupKey

BUFFER_SCHEMA_VERSION = 1


class BufferError(RuntimeError):
    pass


@dataclass
class Transition:
    actor_obs: np.ndarray
    tactile_delta: np.ndarray  # baseline-subtracted, never raw
    action: np.ndarray
    reward: float
    done: float
    next_actor_obs: np.ndarray
    next_tactile_delta: np.ndarray
    group_key: GroupKey
    intervened: bool = False
    mc_return: float | None = None

    def __post_init__(self) -> None:
        if self.reward == 1.0 and self.done != 1.0:
            raise ValueError("sparse success reward requires done == 1")

    def to_dict(self) -> dict:
        return {
            "actor_obs": np.asarray(self.actor_obs).tolist(),
            "tactile_delta": np.asarray(self.tactile_delta).tolist(),
            "action": np.asarray(self.action).tolist(),
            "reward": self.reward,
            "done": self.done,
            "next_actor_obs": np.asarray(self.next_actor_obs).tolist(),
            "next_tactile_delta": np.asarray(self.next_tactile_delta).tolist(),
            "group_key": list(self.group_key.indices),
            "intervened": self.intervened,
            "mc_return": self.mc_return,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transition":
        return cls(
            actor_obs=np.asarray(d["actor_obs"], dtype=np.float64),
            tactile_delta=np.asarray(d["tactile_delta"], dtype=np.float64),
            action=np.asarray(d["action"], dtype=np.float64),
            reward=float(d["reward"]),
            done=float(d["done"]),
            next_actor_obs=np.asarray(d["next_actor_obs"], dtype=np.float64),
            next_tactile_delta=np.asarray(d["next_tactile_delta"], dtype=np.float64),
            group_key=GroupKey(tuple(d["group_key"])),
            intervened=bool(d["intervened"]),
            mc_return=None if d["mc_return"] is None else float(d["mc_return"]),
        )


class _Store:
    """One buffer: insertion-ordered list plus per-group FIFO lists."""

    def __init__(self, capacity: int | None = None):
        self.items: list[Transition] = []
        self.groups: dict[GroupKey, list[Transition]] = {}
        self.capacity = capacity
        self.inserted = 0
        self.evicted = 0

    def __len__(self) -> int:
        return len(self.items)

    def add(self, t: Transition) -> None:
        self.items.append(t)
        self.groups.setdefault(t.group_key, []).append(t)
        self.inserted += 1
        if self.capacity is not None and len(self.items) > self.capacity:
            old = self.items.pop(0)
            bucket = self.groups[old.group_key]
            bucket.pop(0)  # FIFO global order implies FIFO per-group order
            if not bucket:
                del self.groups[old.group_key]
            self.evicted += 1

    def draw(self, rng: np.random.Generator, group_uniform: bool) -> Transition:
        if not self.items:
            raise BufferError("cannot sample from an empty buffer")
        if group_uniform:
            keys = sorted(self.groups.keys(), key=lambda k: k.indices)
            bucket = self.groups[keys[rng.integers(len(keys))]]
            return bucket[rng.integers(len(bucket))]
        return self.items[rng.integers(len(self.items))]


@dataclass
class DualBuffer:
    group_config: GroupConfig
    online_capacity: int | None = None
    demo: _Store = field(default_factory=_Store)
    online: _Store = field(default_factory=_Store)

    def __post_init__(self) -> None:
        self.online.capacity = self.online_capacity

    def insert(self, transition: Transition, into: str) -> None:
        """Append to one buffer; intervention transitions stored online also
        land in the demo buffer."""
        if into == "demo":
            self.demo.add(transition)
        elif into == "online":
            self.online.add(transition)
            if transition.intervened:
                self.demo.add(transition)
        else:
            raise ValueError(f"into must be 'demo' or 'online', got {into!r}")

    def counts(self) -> dict:
        return {
            "demo": len(self.demo),
            "online": len(self.online),
            "demo_inserted": self.demo.inserted,
            "online_inserted": self.online.inserted,
            "online_evicted": self.online.evicted,
        }

    def sample_batch(
        self, batch_size: int, seed: int, group_uniform: bool
    ) -> list[Transition]:
        """ceil(n/2) demo + floor(n/2) online draws (with replacement)."""
        if batch_size < 1:
            raise BufferError("batch_size must be >= 1")
        rng = np.random.default_rng(seed)
        n_demo = (batch_size + 1) // 2
        n_online = batch_size // 2
        batch = [self.demo.draw(rng, group_uniform) for _ in range(n_demo)]
        batch += [self.online.draw(rng, group_uniform) for _ in range(n_online)]
        return batch

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "schema_version": BUFFER_SCHEMA_VERSION,
                        "group_config": self.group_config.to_dict(),
                        "online_capacity": self.online_capacity,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            for name, store in (("demo", self.demo), ("online", self.online)):
                for t in store.items:
                    rec = {"buffer": name, **t.to_dict()}
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DualBuffer":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("schema_version") != BUFFER_SCHEMA_VERSION:
                raise BufferError(
                    f"schema_version: unsupported {header.get('schema_version')!r}"
                )
            buf = cls(
                group_config=GroupConfig.from_dict(header["group_config"]),
                online_capacity=header["online_capacity"],
            )
            for line in fh:
                rec = json.loads(line)
                t = Transition.from_dict(rec)
                # direct store append: intervened flags were already fanned
                # out at capture time
                (buf.demo if rec["buffer"] == "demo" else buf.online).add(t)
        return buf


def label_mc_returns(episode: list[Transition], gamma: float) -> list[Transition]:
    """Backward-accumulated discounted returns written onto the transitions.

    Interior done flags (truncations such as operator-takeover cuts) reset
    the accumulation, so each segment is labeled independently. With the
    sparse terminal reward this reduces to gamma^(T-t) * r_T per segment.
    """
    if not episode:
        raise ValueError("empty episode cannot be labeled")
    g = 0.0
    for t in reversed(episode):
        g = t.reward + gamma * (1.0 - t.done) * g
        t.mc_return = g
    return episode

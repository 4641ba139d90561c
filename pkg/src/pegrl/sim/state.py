"""Simulation state and step-result containers."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimConfig

FRAME_SCHEMA_VERSION = 1
TRACE_SCHEMA_VERSION = 1


@dataclass
class ContactWrench:
    """Planar 3-axis wrench at the hand sensor: lateral, axial, in-plane torque."""

    fx: float = 0.0
    fz: float = 0.0
    my: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fz, self.my], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "ContactWrench":
        a = np.asarray(a, dtype=np.float64)
        return cls(fx=float(a[0]), fz=float(a[1]), my=float(a[2]))

    def __add__(self, other: "ContactWrench") -> "ContactWrench":
        return ContactWrench(self.fx + other.fx, self.fz + other.fz, self.my + other.my)

    def __sub__(self, other: "ContactWrench") -> "ContactWrench":
        return ContactWrench(self.fx - other.fx, self.fz - other.fz, self.my - other.my)

    def force_norm(self) -> float:
        return float(np.hypot(self.fx, self.fz))


@dataclass
class ContactForce:
    """One resolved contact with its force split for auditing."""

    point: np.ndarray  # world (x, z)
    normal: np.ndarray  # unit, direction that separates the peg
    penetration: float
    normal_force: np.ndarray
    friction_force: np.ndarray
    kind: str  # "peg_corner" | "lip"


@dataclass
class SimState:
    """Full ground truth of one episode. Policies never see this directly."""

    config: SimConfig
    gripper_pose: np.ndarray  # (x, z, theta)
    peg_rest_pose: np.ndarray  # pose of the ungrasped peg (tip x, tip z, theta)
    rng: np.random.Generator
    grasped: bool = False
    grasp_offset: np.ndarray | None = None  # (dx mm, dtheta rad), None pre-grasp
    insertion_depth: float = 0.0
    contact_points: list[ContactForce] = field(default_factory=list)
    step_count: int = 0
    jam_counter: int = 0
    last_obs: np.ndarray | None = None
    last_contact_wrench: ContactWrench = field(default_factory=ContactWrench)
    last_raw_tactile: ContactWrench = field(default_factory=ContactWrench)
    prev_tip: np.ndarray | None = None  # tip position one step ago
    obs_bias: np.ndarray = field(default_factory=lambda: np.zeros(2))  # (x mm, rad)

    def copy(self) -> "SimState":
        clone = SimState(
            config=self.config,
            gripper_pose=self.gripper_pose.copy(),
            peg_rest_pose=self.peg_rest_pose.copy(),
            rng=np.random.default_rng(),
            grasped=self.grasped,
            grasp_offset=None if self.grasp_offset is None else self.grasp_offset.copy(),
            insertion_depth=self.insertion_depth,
            contact_points=list(self.contact_points),
            step_count=self.step_count,
            jam_counter=self.jam_counter,
            last_obs=None if self.last_obs is None else self.last_obs.copy(),
            last_contact_wrench=self.last_contact_wrench,
            last_raw_tactile=self.last_raw_tactile,
            prev_tip=None if self.prev_tip is None else self.prev_tip.copy(),
            obs_bias=self.obs_bias.copy(),
        )
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone

    @property
    def peg_pose(self) -> np.ndarray:
        """(tip x, tip z, theta); derived from the gripper when grasped."""
        if not self.grasped:
            return self.peg_rest_pose.copy()
        gx, gz, gth = self.gripper_pose
        dx, dth = self.grasp_offset
        theta = gth + dth
        grip_len = self.config.grip_length
        tip_x = gx + dx * np.cos(gth) + grip_len * np.sin(theta)
        tip_z = gz + dx * np.sin(gth) - grip_len * np.cos(theta)
        return np.array([tip_x, tip_z, theta])

    @property
    def peg_tilt(self) -> float:
        return float(self.peg_pose[2])

    def canonical_bytes(self) -> bytes:
        off = self.grasp_offset if self.grasp_offset is not None else np.array([0.0, 0.0])
        return struct.pack(
            "<3d3d2d?ddqq",
            *self.gripper_pose,
            *self.peg_rest_pose,
            *off,
            self.grasped,
            self.insertion_depth,
            float(self.jam_counter),
            self.step_count,
            len(self.contact_points),
        )

    def state_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()


@dataclass
class StepResult:
    actor_obs: np.ndarray
    raw_tactile: ContactWrench
    success: bool = False
    jammed: bool = False
    slipped: bool = False
    terminated: bool = False


@dataclass
class FrameSnapshot:
    """Serializable scene snapshot for telemetry/rendering."""

    step_index: int
    stage: str
    walls: list[list[list[float]]]  # polylines of [x, z] points
    peg: list[list[float]]  # polygon corners
    contacts: list[dict]
    wrench: list[float]  # raw tactile (fx, fz, my)
    insertion_depth: float
    grasped: bool
    jammed: bool
    schema_version: int = FRAME_SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "step_index": self.step_index,
                "stage": self.stage,
                "walls": self.walls,
                "peg": self.peg,
                "contacts": self.contacts,
                "wrench": self.wrench,
                "insertion_depth": self.insertion_depth,
                "grasped": self.grasped,
                "jammed": self.jammed,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, raw: str) -> "FrameSnapshot":
        d = json.loads(raw)
        version = d.pop("schema_version")
        if version != FRAME_SCHEMA_VERSION:
            raise ValueError(f"schema_version: unsupported {version!r}")
        return cls(schema_version=version, **d)


class TraceWriter:
    """Append-only episode trace: one JSON record per step."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(
            json.dumps({"type": "header", "schema_version": TRACE_SCHEMA_VERSION}) + "\n"
        )

    def record(self, state: SimState, action, wrench: ContactWrench, flags: dict) -> None:
        rec = {
            "type": "step",
            "i": state.step_count,
            "state_hash": state.state_hash(),
            "action": [float(v) for v in np.asarray(action).ravel()],
            "wrench": [wrench.fx, wrench.fz, wrench.my],
            "flags": flags,
        }
        self._fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()

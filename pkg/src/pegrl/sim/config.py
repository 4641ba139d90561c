"""Simulator configuration and validation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geometry import ConfigError, GeometrySpec, make_geometry

CONFIG_SCHEMA_VERSION = 1


@dataclass
class SimConfig:
    geometry: GeometrySpec
    friction_mu: float = 0.3
    contact_stiffness_kn: float = 100.0  # force units per mm of penetration
    max_step_translation: float = 2.0  # mm per control step
    max_step_rotation: float = 0.05  # rad per control step
    grasp_offset_std: tuple[float, float] = (0.5, 0.02)  # (mm, rad)
    tactile_noise_std: float = 0.5
    slip_torque_threshold: float = 1500.0
    jam_window_J: int = 8
    success_depth_frac: float = 0.9
    success_tilt_tol: float = 0.05  # rad
    control_rate: float = 10.0  # Hz
    peg_init_region: tuple[float, float] = (30.0, 80.0)  # lateral spawn interval, mm

    # hand/sensor model
    grasp_tolerance: float = 3.0  # mm, max gripper-to-grip-point distance for a grasp
    grip_height_frac: float = 0.8  # grip point height on the peg / peg_length
    peg_weight: float = 20.0  # static load generating grasp-dependent sensor offset
    grip_lateral_gain: float = 150.0  # lateral squeeze reaction per rad of in-hand tilt
    slip_rotation_step: float = 0.01  # rad of in-hand rotation per slip event

    # jam detection: only counted once the peg is engaged in the bore, where
    # wedged states show up as modest forces with blocked depth progress
    jam_wrench_threshold: float = 1.0
    jam_progress_eps: float = 0.02  # mm of depth progress that counts as movement
    jam_engage_depth: float = 0.2  # mm of insertion before jam counting starts

    # observation noise (camera stand-ins); the close-up view additionally
    # carries a per-grasp calibration bias, so vision alone cannot resolve
    # alignment below that scale and contact search becomes necessary
    obs_global_noise_std: float = 0.3  # mm, overhead view of the peg
    obs_local_noise_std: float = 0.05  # mm, close-up peg-vs-hole view
    obs_angle_noise_std: float = 0.002  # rad
    obs_local_bias_std: float = 0.08  # mm, frozen per grasp
    obs_angle_bias_std: float = 0.001  # rad, frozen per grasp

    gripper_home: tuple[float, float, float] = (55.0, 30.0, 0.0)

    def __post_init__(self) -> None:
        positives = (
            "friction_mu",
            "contact_stiffness_kn",
            "max_step_translation",
            "max_step_rotation",
            "tactile_noise_std",
            "slip_torque_threshold",
            "success_tilt_tol",
            "control_rate",
            "grasp_tolerance",
            "peg_weight",
            "grip_lateral_gain",
            "slip_rotation_step",
            "jam_wrench_threshold",
            "jam_progress_eps",
        )
        for name in positives:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        for name in ("max_step_translation", "max_step_rotation", "control_rate"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be > 0")
        if self.jam_window_J < 1:
            raise ConfigError("jam_window_J: must be >= 1")
        if not (0.0 < self.success_depth_frac <= 1.0):
            raise ConfigError("success_depth_frac: must be in (0, 1]")
        lo, hi = self.peg_init_region
        if hi <= lo:
            raise ConfigError("peg_init_region: must be a non-empty interval")
        if not (0.0 < self.grip_height_frac < 1.0):
            raise ConfigError("grip_height_frac: must be in (0, 1)")
        sx, st = self.grasp_offset_std
        if sx < 0 or st < 0:
            raise ConfigError("grasp_offset_std: must be >= 0")

    @property
    def grip_length(self) -> float:
        """Distance from the grip point down the peg axis to the peg tip."""
        return self.grip_height_frac * self.geometry.peg_length

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        d["schema_version"] = CONFIG_SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported {version!r}")
        d["geometry"] = GeometrySpec.from_dict(d["geometry"])
        for key in ("grasp_offset_std", "peg_init_region", "gripper_home"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_config(
    geometry_name: str = "square", clearance_c: float = 0.25, **overrides
) -> SimConfig:
    geo = make_geometry(geometry_name, clearance_c)
    return SimConfig(geometry=geo, **overrides)

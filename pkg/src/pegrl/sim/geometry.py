"""Hole/peg geometry: parametric wall profiles and named presets.

The world is planar: x lateral, z vertical (up positive), millimetres.
The table top is the plane z = 0 and the hole is centred on x = 0, cut
downward to z = -hole_depth. Each wall is a piecewise-linear profile of
half-width versus depth. Profiles may carry lead-in features (chamfer,
step, taper) that are wider than the bore, but the bore itself - the
narrowest gap, which the peg actually mates with - is exactly
``peg_width + clearance_c`` wide, and width never increases with depth
(no overhangs).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GEOMETRY_NAMES = ("square", "round", "hexagonal", "l_shape", "triangular")
GEOMETRY_SCHEMA_VERSION = 1

_BORE_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated field."""


@dataclass
class WallProfile:
    """Half-width (mm) of one wall as a piecewise-linear function of depth."""

    points: list[tuple[float, float]]  # (depth, half_width), depth ascending

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ConfigError("hole_wall_profile: needs at least two points")
        depths = [p[0] for p in self.points]
        widths = [p[1] for p in self.points]
        if depths[0] != 0.0:
            raise ConfigError("hole_wall_profile: first point must be at depth 0")
        for a, b in zip(depths, depths[1:]):
            if b <= a:
                raise ConfigError("hole_wall_profile: depths must strictly increase")
        for a, b in zip(widths, widths[1:]):
            if b > a + _BORE_TOL:
                raise ConfigError(
                    "hole_wall_profile: half-width must not increase with depth (overhang)"
                )
        if min(widths) <= 0:
            raise ConfigError("hole_wall_profile: half-width must stay positive")

    @property
    def bottom_depth(self) -> float:
        return self.points[-1][0]

    def half_width(self, depth: float) -> float:
        """Interpolated half-width; clamps outside the profile range."""
        ds = [p[0] for p in self.points]
        ws = [p[1] for p in self.points]
        return float(np.interp(depth, ds, ws))

    def min_half_width(self) -> float:
        return min(p[1] for p in self.points)


@dataclass
class GeometrySpec:
    name: str
    hole_depth: float
    peg_width: float
    peg_length: float
    clearance_c: float
    left_wall: WallProfile = field(default=None)  # type: ignore[assignment]
    right_wall: WallProfile = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.name not in GEOMETRY_NAMES:
            raise ConfigError(f"name: unknown geometry {self.name!r}")
        if self.clearance_c <= 0:
            raise ConfigError("clearance_c: must be > 0")
        for f in ("hole_depth", "peg_width", "peg_length"):
            if getattr(self, f) <= 0:
                raise ConfigError(f"{f}: must be > 0")
        if self.left_wall is None or self.right_wall is None:
            raise ConfigError("hole_wall_profile: both walls required")
        for side, wall in (("left", self.left_wall), ("right", self.right_wall)):
            if abs(wall.bottom_depth - self.hole_depth) > _BORE_TOL:
                raise ConfigError(
                    f"hole_wall_profile({side}): profile must end at hole_depth"
                )
        bore = self.left_wall.min_half_width() + self.right_wall.min_half_width()
        expected = self.peg_width + self.clearance_c
        if abs(bore - expected) > _BORE_TOL:
            raise ConfigError(
                f"hole_wall_profile: bore width {bore:.6f} != peg_width + clearance_c "
                f"= {expected:.6f}"
            )

    @property
    def bore_half_width(self) -> float:
        return (self.peg_width + self.clearance_c) / 2.0

    def width_at(self, depth: float) -> float:
        return self.left_wall.half_width(depth) + self.right_wall.half_width(depth)

    def to_dict(self) -> dict:
        return {
            "schema_version": GEOMETRY_SCHEMA_VERSION,
            "name": self.name,
            "hole_depth": self.hole_depth,
            "peg_width": self.peg_width,
            "peg_length": self.peg_length,
            "clearance_c": self.clearance_c,
            "left_wall": [list(p) for p in self.left_wall.points],
            "right_wall": [list(p) for p in self.right_wall.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeometrySpec":
        version = d.get("schema_version")
        if version != GEOMETRY_SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported {version!r}")
        return cls(
            name=d["name"],
            hole_depth=float(d["hole_depth"]),
            peg_width=float(d["peg_width"]),
            peg_length=float(d["peg_length"]),
            clearance_c=float(d["clearance_c"]),
            left_wall=WallProfile([tuple(p) for p in d["left_wall"]]),
            right_wall=WallProfile([tuple(p) for p in d["right_wall"]]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "GeometrySpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def make_geometry(
    name: str,
    clearance_c: float,
    peg_width: float = 20.0,
    peg_length: float = 30.0,
    hole_depth: float = 15.0,
) -> GeometrySpec:
    """Named presets: planar analogs of a five-shape hole family.

    square/round: straight bores. hexagonal: double lead-in chamfer.
    l_shape: one-sided step (asymmetric). triangular: long taper.
    """
    hw = (peg_width + clearance_c) / 2.0
    d = hole_depth
    if name in ("square", "round"):
        left = [(0.0, hw), (d, hw)]
        right = [(0.0, hw), (d, hw)]
    elif name == "hexagonal":
        ch_d = 0.15 * d
        left = [(0.0, hw + 2.0), (ch_d, hw), (d, hw)]
        right = [(0.0, hw + 2.0), (ch_d, hw), (d, hw)]
    elif name == "l_shape":
        st_d = 0.25 * d
        left = [(0.0, hw + 2.5), (st_d - 1e-6, hw + 2.5), (st_d, hw), (d, hw)]
        right = [(0.0, hw), (d, hw)]
    elif name == "triangular":
        tp_d = 0.5 * d
        left = [(0.0, hw + 1.5), (tp_d, hw), (d, hw)]
        right = [(0.0, hw + 1.5), (tp_d, hw), (d, hw)]
    else:
        raise ConfigError(f"name: unknown geometry {name!r}")
    return GeometrySpec(
        name=name,
        hole_depth=hole_depth,
        peg_width=peg_width,
        peg_length=peg_length,
        clearance_c=clearance_c,
        left_wall=WallProfile(left),
        right_wall=WallProfile(right),
    )

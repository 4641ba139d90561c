"""Planar contact detection and quasi-static resolution.

The environment material is everything below the table top except the hole
cavity. Two contact families are tracked:

* peg corners penetrating the material, pushed back out through the
  boundary surface their motion actually crossed (swept test), and
* convex material corners (hole lips, chamfer/step/taper breakpoints)
  penetrating the peg polygon, pushed out through the peg edge the corner
  entered (swept test in the peg frame).

Sweeping matters: a corner that descended onto the table must resolve
upward even when the bore face is geometrically closer, otherwise the
projection quietly funnels a misaligned peg into the hole. When a contact
has no recorded approach (already penetrating at the start), the nearest
exit is used instead.

Resolution is iterative positional projection of the deepest contact,
translation only; if the projection cannot converge (wedged two-point
states), the commanded motion is bisected down to the largest admissible
fraction. Forces are penalty forces evaluated at the commanded
(pre-projection) pose, so blocked motion shows up as wrench, not as
penetration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometrySpec

RESOLVE_ITERS = 16
RESOLVE_TOL = 1e-3  # mm
_X_FAR = 500.0


@dataclass
class RawContact:
    point: np.ndarray  # world position of the contact
    normal: np.ndarray  # unit vector that separates the peg when moved along it
    penetration: float
    kind: str  # "peg_corner" | "lip"


class Environment:
    """Static collision geometry derived from a GeometrySpec."""

    def __init__(self, geo: GeometrySpec):
        self.geo = geo
        depth = geo.hole_depth
        left_pts = [np.array([-hw, -d]) for d, hw in geo.left_wall.points]
        right_pts = [np.array([+hw, -d]) for d, hw in geo.right_wall.points]
        chain = [np.array([-_X_FAR, 0.0]), left_pts[0]]
        chain += left_pts[1:]
        chain += right_pts[::-1]
        chain.append(np.array([_X_FAR, 0.0]))
        self._chain = np.array(chain)
        self._seg_a = self._chain[:-1]
        self._seg_ab = self._chain[1:] - self._chain[:-1]
        self._seg_len2 = np.maximum(np.einsum("ij,ij->i", self._seg_ab, self._seg_ab), 1e-30)
        # free side of each boundary segment (chain runs left to right)
        d = self._seg_ab / np.sqrt(self._seg_len2)[:, None]
        self._seg_normal = np.stack([-d[:, 1], d[:, 0]], axis=1)
        self.depth = depth
        self.corners = np.array(left_pts + right_pts)
        self._ld = np.array([p[0] for p in geo.left_wall.points])
        self._lw = np.array([p[1] for p in geo.left_wall.points])
        self._rd = np.array([p[0] for p in geo.right_wall.points])
        self._rw = np.array([p[1] for p in geo.right_wall.points])

    def wall_polylines(self) -> list[list[list[float]]]:
        return [[[float(x), float(z)] for x, z in self._chain]]

    def inside_material(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask over (n, 2) query points."""
        x, z = pts[:, 0], pts[:, 1]
        below = z < 0.0
        d = -z
        in_cavity = (
            (z >= -self.depth)
            & (x > -np.interp(d, self._ld, self._lw))
            & (x < np.interp(d, self._rd, self._rw))
        )
        return below & ~in_cavity

    def push_out(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        """Nearest-exit penetration and direction for one material point."""
        rel = p[None, :] - self._seg_a
        t = np.clip(np.einsum("ij,ij->i", rel, self._seg_ab) / self._seg_len2, 0.0, 1.0)
        nearest = self._seg_a + t[:, None] * self._seg_ab
        diff = nearest - p
        d2 = np.einsum("ij,ij->i", diff, diff)
        i = int(np.argmin(d2))
        pen = float(np.sqrt(d2[i]))
        if pen < 1e-12:
            return 0.0, self._seg_normal[i].copy()
        return pen, diff[i] / pen

    def crossed_surface(
        self, start: np.ndarray, end: np.ndarray
    ) -> tuple[float, np.ndarray] | None:
        """First boundary segment crossed by start->end, entering material.

        Returns (penetration along that surface's normal at `end`, normal).
        """
        r = end - start
        best_t, best_i = np.inf, -1
        for i in range(len(self._seg_a)):
            a, s = self._seg_a[i], self._seg_ab[i]
            denom = r[0] * s[1] - r[1] * s[0]
            if abs(denom) < 1e-15:
                continue
            qp = a - start
            t = (qp[0] * s[1] - qp[1] * s[0]) / denom
            u = (qp[0] * r[1] - qp[1] * r[0]) / denom
            # small backward extension: a start resting just inside the
            # surface (resolution tolerance residue) still attributes here
            if -0.25 <= t <= 1.0 and -1e-9 <= u <= 1.0 + 1e-9:
                if float(r @ self._seg_normal[i]) < 0 and t < best_t:  # into material
                    best_t, best_i = t, i
        if best_i < 0:
            return None
        n = self._seg_normal[best_i]
        pen = float((self._seg_a[best_i] - end) @ n)
        if pen <= 0:
            return None
        return pen, n.copy()


def peg_polygon(tip: np.ndarray, theta: float, width: float, length: float) -> np.ndarray:
    """CCW rectangle corners from the tip (bottom-centre) pose."""
    c, s = np.cos(theta), np.sin(theta)
    lateral = np.array([c, s])
    axis = np.array([-s, c])
    h = width / 2.0
    bl = tip - h * lateral
    br = tip + h * lateral
    return np.array([bl, br, br + length * axis, bl + length * axis])


def _to_local(p: np.ndarray, tip: np.ndarray, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    d = p - tip
    return np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1]])


def _local_face_entry(
    prev: np.ndarray, now: np.ndarray, h: float, length: float
) -> tuple[float, np.ndarray] | None:
    """Which face of the local rectangle [-h,h]x[0,L] did prev->now enter
    through? Returns (penetration past that face, local outward normal)."""
    d = now - prev
    best = None  # (t_enter, face normal, penetration)
    faces = (
        (np.array([-1.0, 0.0]), -h, 0),  # x = -h
        (np.array([+1.0, 0.0]), +h, 0),  # x = +h
        (np.array([0.0, -1.0]), 0.0, 1),  # z = 0 (bottom)
        (np.array([0.0, +1.0]), length, 1),  # z = L (top)
    )
    for normal, plane, axis in faces:
        denom = d[axis]
        if abs(denom) < 1e-15:
            continue
        t = (plane - prev[axis]) / denom
        if t < -0.25 or t > 1.0:  # small backward window, as in crossed_surface
            continue
        # entering means moving against the face's outward normal
        if d @ normal >= 0:
            continue
        hit = prev + t * d
        other = 1 - axis
        lo, hi = (-h, h) if other == 0 else (0.0, length)
        if lo - 1e-9 <= hit[other] <= hi + 1e-9:
            if best is None or t < best[0]:
                pen = (plane - now[axis]) * normal[axis]
                best = (t, normal, float(pen))
    if best is None or best[2] <= 0:
        return None
    return best[2], best[1]


def detect_contacts(
    env: Environment,
    tip: np.ndarray,
    theta: float,
    width: float,
    length: float,
    prev_tip: np.ndarray | None = None,
    prev_theta: float | None = None,
) -> list[RawContact]:
    """Contacts at the given pose. When the previous pose is supplied, the
    push-out direction comes from the surface the motion crossed."""
    poly = peg_polygon(tip, theta, width, length)
    prev_poly = None
    if prev_tip is not None:
        prev_poly = peg_polygon(prev_tip, prev_theta if prev_theta is not None else theta,
                                width, length)
    contacts: list[RawContact] = []

    mask = env.inside_material(poly)
    for idx in np.nonzero(mask)[0]:
        corner = poly[idx]
        hit = None
        if prev_poly is not None:
            hit = env.crossed_surface(prev_poly[idx], corner)
        if hit is None:
            hit = env.push_out(corner)
        pen, normal = hit
        if pen > 1e-12:
            contacts.append(
                RawContact(point=corner.copy(), normal=normal, penetration=float(pen),
                           kind="peg_corner")
            )

    h = width / 2.0
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    local = (env.corners - tip) @ rot.T
    inside = (
        (local[:, 0] > -h) & (local[:, 0] < h)
        & (local[:, 1] > 0.0) & (local[:, 1] < length)
    )
    for idx in np.nonzero(inside)[0]:
        q = env.corners[idx]
        now_loc = local[idx]
        entry = None
        if prev_tip is not None:
            prev_loc = _to_local(q, prev_tip, prev_theta if prev_theta is not None else theta)
            entry = _local_face_entry(prev_loc, now_loc, h, length)
        if entry is None:
            # nearest face fallback
            depths = np.array(
                [now_loc[0] + h, h - now_loc[0], now_loc[1], length - now_loc[1]]
            )
            normals_loc = np.array([[-1, 0], [1, 0], [0, -1], [0, 1]], dtype=np.float64)
            k = int(np.argmin(depths))
            entry = (float(depths[k]), normals_loc[k])
        pen, n_loc = entry
        if pen > 1e-12:
            outward_world = rot.T @ n_loc
            contacts.append(
                RawContact(point=q.copy(), normal=-outward_world, penetration=float(pen),
                           kind="lip")
            )
    return contacts


def max_penetration(contacts: list[RawContact]) -> float:
    return max((c.penetration for c in contacts), default=0.0)


def resolve_translation(
    env: Environment,
    tip: np.ndarray,
    theta: float,
    width: float,
    length: float,
    prev_tip: np.ndarray | None = None,
    prev_theta: float | None = None,
) -> tuple[np.ndarray, bool]:
    """Project the peg out of penetration, keeping orientation fixed.

    The pre-motion pose (when given) anchors which surfaces push back.
    Returns (tip translation offset, converged flag).
    """
    offset = np.zeros(2)
    for _ in range(RESOLVE_ITERS):
        contacts = detect_contacts(
            env, tip + offset, theta, width, length, prev_tip, prev_theta
        )
        if not contacts:
            return offset, True
        deepest = max(contacts, key=lambda c: c.penetration)
        if deepest.penetration <= RESOLVE_TOL:
            return offset, True
        offset = offset + deepest.normal * (deepest.penetration - 0.5 * RESOLVE_TOL)
    contacts = detect_contacts(env, tip + offset, theta, width, length, prev_tip, prev_theta)
    return offset, max_penetration(contacts) <= RESOLVE_TOL

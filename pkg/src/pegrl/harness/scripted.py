"""Privileged scripted controllers: the demonstrator that replaces human
demonstrations and the intervenor that replaces the human operator.

Both read ground-truth simulator state (grasp offset, exact peg pose); the
learned policies never do. The demonstrator walks a fixed phase sequence
per episode; the intervenor runs a bounded lift-and-realign script whenever
a trigger fires.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim import HOLE_X, SimState, grip_point

APPROACH_HEIGHT = 8.0  # hover above the grip point before closing, mm
CARRY_TIP_Z = 24.0  # tip height while traversing to the hole, mm


@dataclass
class DemonstratorParams:
    p_gain: float = 0.9
    action_noise: tuple[float, float] = (0.15, 0.003)  # translation mm, rotation rad
    hover_tip_z: float = 1.5  # default tip height at the reach endpoint
    align_tol: float = 0.01  # mm of tip alignment before descending
    tilt_tol: float = 0.002  # rad
    wiggle_amp: float = 0.04  # compliance wiggle while descending, mm
    descend_rate: float = 0.8  # mm per step


@dataclass
class ReachScript:
    """Phase-sequenced grasp-and-carry demonstration."""

    params: DemonstratorParams
    hover_tip_z: float
    rng: np.random.Generator
    phase: str = "above_peg"

    def done(self, state: SimState) -> bool:
        return self.phase == "done"

    def action(self, state: SimState) -> np.ndarray:
        """(dx, dz, dtheta, grip) toward the current phase target."""
        cfg = state.config
        p = self.params
        mt, mr = cfg.max_step_translation, cfg.max_step_rotation
        gx, gz, gth = state.gripper_pose
        grip_cmd = 1.0 if state.grasped else 0.0
        target = None
        dth_cmd = 0.0

        if not state.grasped:
            gp = grip_point(state)
            if self.phase not in ("above_peg", "descend_grip"):
                self.phase = "above_peg"
            if self.phase == "above_peg":
                target = gp + [0.0, APPROACH_HEIGHT]
                if np.linalg.norm(state.gripper_pose[:2] - target) < 0.6:
                    self.phase = "descend_grip"
            if self.phase == "descend_grip":
                target = gp
                if np.linalg.norm(state.gripper_pose[:2] - gp) < 0.5 * cfg.grasp_tolerance:
                    grip_cmd = 1.0
        else:
            tip_x, tip_z, theta = state.peg_pose
            if self.phase in ("above_peg", "descend_grip"):
                self.phase = "lift"
            if self.phase == "lift":
                target = np.array([gx, CARRY_TIP_Z + cfg.grip_length])
                if tip_z > CARRY_TIP_Z - 1.0:
                    self.phase = "traverse"
            if self.phase == "traverse":
                # place the peg tip over the hole, privileged compensation
                target = np.array([gx - (tip_x - HOLE_X), gz])
                dth_cmd = np.clip(-theta * p.p_gain, -mr, mr)
                if abs(tip_x - HOLE_X) < 0.3 and abs(theta) < 0.004:
                    self.phase = "hover_down"
            if self.phase == "hover_down":
                target = np.array([gx - (tip_x - HOLE_X), gz - (tip_z - self.hover_tip_z)])
                dth_cmd = np.clip(-theta * p.p_gain, -mr, mr)
                if abs(tip_z - self.hover_tip_z) < 0.15 and abs(tip_x - HOLE_X) < 0.2:
                    self.phase = "done"

        if target is None:
            target = state.gripper_pose[:2]
        delta = (target - state.gripper_pose[:2]) * p.p_gain
        noise = self.rng.normal(0.0, p.action_noise[0], size=2)
        dth_noise = self.rng.normal(0.0, p.action_noise[1])
        return np.array(
            [
                np.clip(delta[0] + noise[0], -mt, mt),
                np.clip(delta[1] + noise[1], -mt, mt),
                np.clip(dth_cmd + dth_noise, -mr, mr),
                grip_cmd,
            ]
        )


@dataclass
class InsertScript:
    """Observation-driven insertion: align on the (biased, noisy) close-up
    estimate, descend until contact blocks, then sweep laterally under light
    pressure until the peg drops in. This is the behaviour a person shows
    when the view cannot resolve the clearance: feel for the gap.

    Uses only what the cameras/pose stream provide, so recorded episodes are
    imitable by a policy with the same observations.
    """

    params: DemonstratorParams
    phase: str = "align"
    step_idx: int = 0
    blocked_count: int = 0
    search_dir: float = 1.0
    search_travel: float = 0.0
    search_amp: float = 0.15
    last_dz: float = 0.0

    def action(self, state: SimState) -> np.ndarray:
        from ..sim import observe

        cfg = state.config
        mt, mr = cfg.max_step_translation, cfg.max_step_rotation
        gl = cfg.grip_length
        obs = observe(state)
        est_x, est_z, est_th = obs[6], obs[7], obs[8]
        vz = obs[10]
        self.step_idx += 1

        blocked = self.last_dz < -0.2 and vz > -0.08
        self.blocked_count = self.blocked_count + 1 if blocked else 0

        dx = -0.8 * est_x
        dth = np.clip(-0.7 * est_th, -mr, mr)
        dz = 0.0
        if self.phase == "align":
            if abs(est_x) < 0.06 and abs(est_th) < 0.004:
                self.phase = "descend"
        if self.phase == "descend":
            dx = -0.4 * est_x
            dz = -self.params.descend_rate
            if est_z < -0.8:
                self.phase = "inside"
            elif self.blocked_count >= 2:
                self.phase = "search"
                self.search_dir = -1.0 if est_x > 0 else 1.0
                self.search_travel = 0.0
                self.search_amp = 0.15
        if self.phase == "search":
            if vz < -0.25 or est_z < -0.8:  # dropped in
                self.phase = "inside"
            else:
                dth = 0.0  # hold tilt steady while feeling for the gap
                lateral = 0.04 * self.search_dir
                self.search_travel += abs(lateral)
                if self.search_travel >= self.search_amp:
                    self.search_dir = -self.search_dir
                    self.search_travel = 0.0
                    self.search_amp = min(self.search_amp + 0.08, 0.5)
                dx = lateral
                dz = -0.3
        if self.phase == "inside":
            dx = -0.2 * est_x + 0.015 * np.sin(self.step_idx / 2.0)
            dth = np.clip(-0.7 * est_th, -mr, mr)
            dz = -self.params.descend_rate
            if self.blocked_count >= 3:  # wedged: twitch up and re-seat
                dz = +0.4
                self.blocked_count = 0

        # a hand rotation swings the tip by grip_length * dtheta; compensate
        # so tilt corrections do not translate the tip
        dx = dx - gl * dth
        self.last_dz = dz
        return np.array([np.clip(dx, -mt, mt), np.clip(dz, -mt, mt), dth])


def insert_action(state: SimState, params: DemonstratorParams, step_idx: int) -> np.ndarray:
    """Privileged insertion command: align the true tip pose exactly, then
    descend with a small compliance wiggle. Used by the intervening operator,
    never recorded as imitation data."""
    cfg = state.config
    mt, mr = cfg.max_step_translation, cfg.max_step_rotation
    tip_x, tip_z, theta = state.peg_pose
    dth = np.clip(-theta * params.p_gain, -mr, mr)
    dx = -(tip_x - HOLE_X) * params.p_gain
    aligned = abs(tip_x - HOLE_X) < params.align_tol and abs(theta) < params.tilt_tol
    if aligned:
        dz = -params.descend_rate
        dx += params.wiggle_amp * np.sin(step_idx / 2.0)
    else:
        dz = 0.0 if tip_z < 0.5 else -0.1  # finish aligning before committing
    dx -= cfg.grip_length * dth  # cancel the tip swing of the hand rotation
    return np.array([np.clip(dx, -mt, mt), np.clip(dz, -mt, mt), dth])


@dataclass
class IntervenorConfig:
    wrench_safety_threshold: float = 60.0  # overwritten from demo statistics
    stall_steps: int = 25  # insertion steps with no depth progress
    max_script_steps: int = 80
    lift_tip_z: float = 1.2
    align_tol: float = 0.02
    tilt_tol: float = 0.003
    wander_x: float = 6.0  # |tip - hole| beyond this is an unrecoverable drift
    wander_z: float = 8.0  # tip height beyond this has left the task funnel


@dataclass
class ScriptedIntervenor:
    """Takes over on jam / force spike / stall / drift; lifts out of trouble,
    realigns with privileged state, then guides the insertion until either
    the release horizon or the script cap hands control back. Like a human
    operator, it finishes the job when the policy cannot, so assisted
    successes exist from the first episodes."""

    config: IntervenorConfig
    engaged: bool = False
    script_step: int = 0
    phase: str = "recover"
    _stall_count: int = 0
    _last_depth: float = 0.0
    interventions: int = 0

    def reset_episode(self) -> None:
        self.engaged = False
        self.script_step = 0
        self.phase = "recover"
        self._stall_count = 0
        self._last_depth = 0.0

    def observe_step(self, state: SimState, jammed: bool) -> None:
        """Update trigger statistics after every environment step."""
        depth = state.insertion_depth
        if depth - self._last_depth < 1e-3 and state.grasped and state.peg_pose[1] < 2.0:
            self._stall_count += 1
        else:
            self._stall_count = 0
        self._last_depth = depth
        if self.engaged:
            return
        force = state.last_contact_wrench.force_norm()
        tip_x, tip_z, _ = state.peg_pose
        wandered = abs(tip_x - HOLE_X) > self.config.wander_x or tip_z > self.config.wander_z
        if (
            jammed
            or force > self.config.wrench_safety_threshold
            or self._stall_count >= self.config.stall_steps
            or wandered
        ):
            self.engaged = True
            self.script_step = 0
            self.phase = "recover"
            self.interventions += 1

    def _disengage(self) -> None:
        self.engaged = False
        self._stall_count = 0

    def action(self, state: SimState) -> np.ndarray | None:
        """Corrective command while engaged; None when not intervening."""
        if not self.engaged:
            return None
        cfg = state.config
        mt, mr = cfg.max_step_translation, cfg.max_step_rotation
        tip_x, tip_z, theta = state.peg_pose
        self.script_step += 1
        if self.script_step > self.config.max_script_steps:
            self._disengage()
            return None

        if self.phase == "recover":
            if tip_z < self.config.lift_tip_z:
                return np.array([0.0, min(1.0, mt), 0.0])  # lift clear first
            self.phase = "align"
        dth = np.clip(-theta * 0.9, -mr, mr)
        dx = -(tip_x - HOLE_X) * 0.9
        if self.phase == "align":
            aligned = (
                abs(tip_x - HOLE_X) < self.config.align_tol
                and abs(theta) < self.config.tilt_tol
            )
            if not aligned:
                dz = max(-1.0, -mt) if tip_z > 3.0 else 0.0  # rejoin hover band
                dx -= cfg.grip_length * dth  # cancel the rotation's tip swing
                return np.array([np.clip(dx, -mt, mt), dz, dth])
            self.phase = "insert"
        # insert phase: committed guided descent, wiggle to ease entry
        dx += 0.015 * np.sin(self.script_step / 2.0)
        dx -= cfg.grip_length * dth
        return np.array([np.clip(dx, -mt, mt), max(-0.8, -mt), dth])

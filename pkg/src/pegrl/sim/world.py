"""Episode-level simulator operations.

Conventions: the hole is centred at x = 0 with its entry in the table-top
plane z = 0. The gripper pose is (x, z, theta); the held peg's pose derives
from it through the in-hand grasp offset and is never stored separately.
All step noise (tactile, observation, slip kick) is drawn from the episode
RNG carried inside SimState, so a (config, seed, action sequence) triple
replays bit-identically.
"""
from __future__ import annotations

import numpy as np

from .config import SimConfig
from .contact import (
    Environment,
    RawContact,
    detect_contacts,
    peg_polygon,
    resolve_translation,
)
from .state import ContactForce, ContactWrench, FrameSnapshot, SimState, StepResult

HOLE_X = 0.0
_MIN_GRIPPER_Z = 0.5  # free-flight floor for the (uncollided) hand, mm
_BISECT_STEPS = 20


class ProtocolError(RuntimeError):
    """Operation called out of protocol order (e.g. step before grasp)."""


class InputError(ValueError):
    """Malformed runtime input such as NaN actions."""


def _env_for(config: SimConfig) -> Environment:
    return Environment(config.geometry)


def reset(config: SimConfig, seed: int) -> SimState:
    """Fresh episode: gripper at home, peg standing upright at a seeded
    uniform position inside peg_init_region."""
    rng = np.random.default_rng(seed)
    lo, hi = config.peg_init_region
    spawn_x = float(rng.uniform(lo, hi))
    state = SimState(
        config=config,
        gripper_pose=np.array(config.gripper_home, dtype=np.float64),
        peg_rest_pose=np.array([spawn_x, 0.0, 0.0]),
        rng=rng,
    )
    state.env = _env_for(config)  # type: ignore[attr-defined]
    state.prev_tip = state.peg_pose[:2].copy()
    state.last_obs = _observe(state)
    return state


def _get_env(state: SimState) -> Environment:
    env = getattr(state, "env", None)
    if env is None:
        env = _env_for(state.config)
        state.env = env  # type: ignore[attr-defined]
    return env


def grip_point(state: SimState) -> np.ndarray:
    """World position where the hand must be to hold the peg (on its axis,
    grip_length above the tip)."""
    tip_x, tip_z, theta = state.peg_pose
    gl = state.config.grip_length
    return np.array([tip_x - gl * np.sin(theta), tip_z + gl * np.cos(theta)])


def grasp(state: SimState, seed: int) -> tuple[SimState, bool]:
    """Close the hand on the peg, sampling the in-hand pose error.

    Returns (state, ok). A gripper outside grasp_tolerance yields ok=False
    (an episode-level failure, not an exception). On success the gripper is
    re-posed so the peg itself does not move while the sampled offset takes
    effect.
    """
    if state.grasped:
        raise ProtocolError("grasp: already grasped")
    target = grip_point(state)
    gap = float(np.linalg.norm(state.gripper_pose[:2] - target))
    if gap > state.config.grasp_tolerance:
        return state, False
    sx, st = state.config.grasp_offset_std
    rng = np.random.default_rng(seed)
    dx = float(rng.normal(0.0, sx)) if sx > 0 else 0.0
    dth = float(rng.normal(0.0, st)) if st > 0 else 0.0
    state.grasp_offset = np.array([dx, dth])
    state.grasped = True
    # close-up view calibration error is tied to how the part sits in hand
    bx = state.config.obs_local_bias_std
    bt = state.config.obs_angle_bias_std
    state.obs_bias = np.array(
        [rng.normal(0.0, bx) if bx > 0 else 0.0, rng.normal(0.0, bt) if bt > 0 else 0.0]
    )
    # place the hand so that peg_pose(gripper, offset) equals the rest pose
    tip_x, tip_z, theta_p = state.peg_rest_pose
    gth = theta_p - dth
    gl = state.config.grip_length
    gx = tip_x - dx * np.cos(gth) - gl * np.sin(theta_p)
    gz = tip_z - dx * np.sin(gth) + gl * np.cos(theta_p)
    state.gripper_pose = np.array([gx, gz, gth])
    state.insertion_depth = _depth_of(state)
    state.prev_tip = state.peg_pose[:2].copy()
    state.last_obs = _observe(state)
    return state, True


def move_gripper(state: SimState, delta) -> SimState:
    """Free-flight hand motion before grasping; the resting peg stays put."""
    if state.grasped:
        raise ProtocolError("move_gripper: hand is holding the peg, use step")
    d = np.asarray(delta, dtype=np.float64)[:3]
    if not np.all(np.isfinite(d)):
        raise InputError("move_gripper: non-finite delta")
    mt, mr = state.config.max_step_translation, state.config.max_step_rotation
    d = np.array([np.clip(d[0], -mt, mt), np.clip(d[1], -mt, mt), np.clip(d[2], -mr, mr)])
    state.gripper_pose = state.gripper_pose + d
    state.gripper_pose[1] = max(state.gripper_pose[1], _MIN_GRIPPER_Z)
    state.step_count += 1
    state.prev_tip = state.peg_pose[:2].copy()  # resting peg: zero motion
    state.last_obs = _observe(state)
    return state


def _depth_of(state: SimState) -> float:
    return max(0.0, -float(state.peg_pose[1]))


def _tip_for_gripper(state: SimState, gripper: np.ndarray) -> tuple[np.ndarray, float]:
    gx, gz, gth = gripper
    dx, dth = state.grasp_offset
    theta = gth + dth
    gl = state.config.grip_length
    tip = np.array(
        [gx + dx * np.cos(gth) + gl * np.sin(theta), gz + dx * np.sin(gth) - gl * np.cos(theta)]
    )
    return tip, theta


def _grasp_load(state: SimState) -> ContactWrench:
    """Static sensor offset from holding the peg; varies with the in-hand
    pose error, which is what makes tactile baselines grasp-dependent."""
    cfg = state.config
    if cfg.peg_weight == 0.0 and cfg.grip_lateral_gain == 0.0:
        return ContactWrench()
    gth = float(state.gripper_pose[2])
    dx, dth = state.grasp_offset
    theta_p = gth + dth
    w = cfg.peg_weight
    arm = cfg.grip_length - cfg.geometry.peg_length / 2.0
    fx = -cfg.grip_lateral_gain * np.sin(dth)
    fz = -w * np.cos(theta_p)
    my = -w * (dx * np.cos(gth) + arm * np.sin(theta_p))
    return ContactWrench(float(fx), float(fz), float(my))


def _contact_wrench(
    state: SimState,
    contacts: list[RawContact],
    commanded: np.ndarray,
    gripper: np.ndarray,
) -> tuple[ContactWrench, list[ContactForce]]:
    """Penalty + Coulomb friction wrench summed at the hand sensor."""
    cfg = state.config
    kn = cfg.contact_stiffness_kn
    mu = cfg.friction_mu
    sensor = gripper[:2]
    fx = fz = my = 0.0
    forces: list[ContactForce] = []
    for c in contacts:
        fn_vec = kn * c.penetration * c.normal
        tangent = np.array([-c.normal[1], c.normal[0]])
        r = c.point - sensor
        v = commanded[:2] + commanded[2] * np.array([-r[1], r[0]])
        vt = float(v @ tangent)
        if abs(vt) > 1e-9:
            ft_vec = -mu * kn * c.penetration * np.sign(vt) * tangent
        else:
            ft_vec = np.zeros(2)
        f = fn_vec + ft_vec
        fx += f[0]
        fz += f[1]
        my += float(r[0] * f[1] - r[1] * f[0])
        forces.append(
            ContactForce(
                point=c.point,
                normal=c.normal,
                penetration=c.penetration,
                normal_force=fn_vec,
                friction_force=ft_vec,
                kind=c.kind,
            )
        )
    return ContactWrench(fx, fz, my), forces


def _admissible_pose(
    state: SimState, base: np.ndarray, delta: np.ndarray
) -> np.ndarray:
    """Largest admissible fraction of the commanded motion, with penetration
    projected below tolerance. Falls back to bisection when wedged."""
    env = _get_env(state)
    geo = state.config.geometry
    tip_base, theta_base = _tip_for_gripper(state, base)

    def attempt(fraction: float) -> np.ndarray | None:
        pose = base + fraction * delta
        tip, theta = _tip_for_gripper(state, pose)
        offset, ok = resolve_translation(
            env, tip, theta, geo.peg_width, geo.peg_length, tip_base, theta_base
        )
        if not ok:
            return None
        out = pose.copy()
        out[:2] += offset
        return out

    full = attempt(1.0)
    if full is not None:
        return full
    lo, hi = 0.0, 1.0
    best = base.copy()
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        cand = attempt(mid)
        if cand is None:
            hi = mid
        else:
            best = cand
            lo = mid
    return best


def step(state: SimState, action) -> tuple[SimState, StepResult]:
    """One held-peg control step: commanded twist, contact forces, slip/jam
    bookkeeping, seeded sensor noise."""
    if not state.grasped:
        raise ProtocolError("step: peg is not grasped")
    a = np.asarray(action, dtype=np.float64).ravel()[:3]
    if not np.all(np.isfinite(a)):
        raise InputError("step: non-finite action")
    cfg = state.config
    mt, mr = cfg.max_step_translation, cfg.max_step_rotation
    a = np.array([np.clip(a[0], -mt, mt), np.clip(a[1], -mt, mt), np.clip(a[2], -mr, mr)])

    env = _get_env(state)
    geo = cfg.geometry
    pose0 = state.gripper_pose.copy()
    depth0 = _depth_of(state)
    tip0, theta0 = _tip_for_gripper(state, pose0)

    # penalty wrench at the commanded (unresolved) pose: blocked motion
    # becomes force rather than penetration
    pose_cmd = pose0 + a
    tip_cmd, theta_cmd = _tip_for_gripper(state, pose_cmd)
    contacts_cmd = detect_contacts(
        env, tip_cmd, theta_cmd, geo.peg_width, geo.peg_length, tip0, theta0
    )
    wrench, forces = _contact_wrench(state, contacts_cmd, a, pose_cmd)

    state.gripper_pose = _admissible_pose(state, pose0, a)

    # in-hand slip: contact torque above the grip's holding threshold
    slipped = False
    if abs(wrench.my) > cfg.slip_torque_threshold:
        kick = cfg.slip_rotation_step * np.sign(wrench.my) * (0.75 + 0.5 * state.rng.random())
        old_offset = state.grasp_offset.copy()
        state.grasp_offset = state.grasp_offset + np.array([0.0, kick])
        tip, theta = _tip_for_gripper(state, state.gripper_pose)
        off, ok = resolve_translation(
            env, tip, theta, geo.peg_width, geo.peg_length, tip0, theta0
        )
        if ok:
            state.gripper_pose[:2] += off
            slipped = True
        else:
            state.grasp_offset = old_offset  # no room to rotate in place
    depth1 = _depth_of(state)
    state.insertion_depth = depth1

    # jamming: engaged in the bore, commanded downward tip motion, blocked
    # depth progress, non-trivial wrench
    r_tip = tip0 - pose0[:2]
    tip_vz = a[1] + a[2] * r_tip[0]
    commanded_down = tip_vz < -1e-9
    progress = depth1 - depth0
    engaged = depth0 >= cfg.jam_engage_depth
    if (
        engaged
        and commanded_down
        and progress < cfg.jam_progress_eps
        and wrench.force_norm() > cfg.jam_wrench_threshold
    ):
        state.jam_counter += 1
    elif progress >= cfg.jam_progress_eps:
        state.jam_counter = 0
    jammed = state.jam_counter >= cfg.jam_window_J

    state.contact_points = forces  # the force-generating (commanded-pose) set
    state.last_contact_wrench = wrench

    noise = state.rng.normal(0.0, cfg.tactile_noise_std, size=3) if cfg.tactile_noise_std > 0 else np.zeros(3)
    raw = _grasp_load(state) + wrench + ContactWrench.from_array(noise)
    state.last_raw_tactile = raw

    success = check_success(state)
    state.step_count += 1
    state.prev_tip = tip0.copy()  # realized motion feeds the next observation
    state.last_obs = _observe(state)
    return state, StepResult(
        actor_obs=state.last_obs,
        raw_tactile=raw,
        success=success,
        jammed=jammed,
        slipped=slipped,
        terminated=success,
    )


def relocate_gripper(state: SimState, xy) -> SimState:
    """Teleport the (grasped) hand to a recorded endpoint, lifting as needed
    so the carried peg lands penetration-free. Used for failure-endpoint
    resets between insertion attempts."""
    if not state.grasped:
        raise ProtocolError("relocate_gripper: peg is not grasped")
    env = _get_env(state)
    geo = state.config.geometry
    pose = state.gripper_pose.copy()
    pose[:2] = np.asarray(xy, dtype=np.float64)
    for lift in np.arange(0.0, 30.0, 1.0):
        cand = pose + np.array([0.0, lift, 0.0])
        tip, theta = _tip_for_gripper(state, cand)
        off, ok = resolve_translation(env, tip, theta, geo.peg_width, geo.peg_length)
        if ok:
            cand[:2] += off
            state.gripper_pose = cand
            state.insertion_depth = _depth_of(state)
            state.prev_tip = state.peg_pose[:2].copy()  # teleports read as still
            state.last_obs = _observe(state)
            return state
    raise ProtocolError("relocate_gripper: no admissible pose found")


def check_success(state: SimState) -> bool:
    cfg = state.config
    need = cfg.success_depth_frac * cfg.geometry.hole_depth
    return state.insertion_depth >= need and abs(state.peg_tilt) <= cfg.success_tilt_tol


OBS_DIM = 11


def _observe(state: SimState) -> np.ndarray:
    """Observation vector; noisy fields stand in for camera views.

    [0:3]  gripper pose (exact proprioception)
    [3]    grasped flag
    [4:6]  peg tip position, coarse noise (overhead view)
    [6:8]  peg tip relative to the hole entry, fine noise + per-grasp bias
           (close-up view)
    [8]    peg tilt, noisy + per-grasp bias
    [9:11] realized tip motion over the last step, noisy (two-frame
           differencing; this is what makes blocked motion observable)
    """
    cfg = state.config
    tip_x, tip_z, theta = state.peg_pose
    rng = state.rng
    g_noise = rng.normal(0.0, cfg.obs_global_noise_std, size=2)
    l_noise = rng.normal(0.0, cfg.obs_local_noise_std, size=2)
    a_noise = rng.normal(0.0, cfg.obs_angle_noise_std)
    v_noise = rng.normal(0.0, cfg.obs_local_noise_std, size=2)
    prev = state.prev_tip if state.prev_tip is not None else np.array([tip_x, tip_z])
    return np.array(
        [
            state.gripper_pose[0],
            state.gripper_pose[1],
            state.gripper_pose[2],
            1.0 if state.grasped else 0.0,
            tip_x + g_noise[0],
            tip_z + g_noise[1],
            (tip_x - HOLE_X) + state.obs_bias[0] + l_noise[0],
            tip_z + l_noise[1],
            theta + state.obs_bias[1] + a_noise,
            (tip_x - prev[0]) + v_noise[0],
            (tip_z - prev[1]) + v_noise[1],
        ]
    )


def observe(state: SimState) -> np.ndarray:
    """Latest cached observation (noise is drawn inside reset/grasp/step)."""
    if state.last_obs is None:
        state.last_obs = _observe(state)
    return state.last_obs


def render_frame(state: SimState, stage: str = "reach") -> FrameSnapshot:
    env = _get_env(state)
    geo = state.config.geometry
    tip_x, tip_z, theta = state.peg_pose
    poly = peg_polygon(np.array([tip_x, tip_z]), theta, geo.peg_width, geo.peg_length)
    contacts = [
        {
            "point": [float(c.point[0]), float(c.point[1])],
            "normal": [float(c.normal[0]), float(c.normal[1])],
            "penetration": float(c.penetration),
            "force": [
                float(c.normal_force[0] + c.friction_force[0]),
                float(c.normal_force[1] + c.friction_force[1]),
            ],
            "kind": c.kind,
        }
        for c in state.contact_points
    ]
    raw = state.last_raw_tactile
    return FrameSnapshot(
        step_index=state.step_count,
        stage=stage,
        walls=env.wall_polylines(),
        peg=[[float(p[0]), float(p[1])] for p in poly],
        contacts=contacts,
        wrench=[raw.fx, raw.fz, raw.my],
        insertion_depth=state.insertion_depth,
        grasped=state.grasped,
        jammed=state.jam_counter >= state.config.jam_window_J,
    )

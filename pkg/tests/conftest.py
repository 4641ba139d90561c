import numpy as np
import pytest

from pegrl.sim import default_config, grasp, grip_point, reset, step


@pytest.fixture(scope="session")
def shared_reach():
    """One adequately trained reach policy + endpoints, shared by harness
    tests (reach behaviour does not depend on clearance)."""
    from pegrl.harness import generate_reach_demos
    from pegrl.reach import ReachPolicyConfig
    from pegrl.reach import train as train_reach

    sim_config = default_config("square", 1.5)
    demos = generate_reach_demos(sim_config, count=40, seed=777)
    policy = train_reach(
        demos, epochs=60, batch=64, seed=778,
        config=ReachPolicyConfig(hidden=(128, 128)),
    )
    return policy, demos.endpoints()


@pytest.fixture(scope="session")
def shared_insert_demos():
    from pegrl.harness import generate_insert_demos

    return generate_insert_demos(default_config("square", 1.5), count=8, seed=1000)


def make_hover_state(
    clearance=0.25,
    geometry="square",
    seed=7,
    grasp_seed=3,
    tilt=None,
    offset=None,
    hover_height=1.0,
    **config_overrides,
):
    """Grasped peg, centred over the hole with the tip hover_height above
    the opening. Test scaffolding with privileged access."""
    cfg = default_config(geometry, clearance_c=clearance, **config_overrides)
    state = reset(cfg, seed=seed)
    gp = grip_point(state)
    state.gripper_pose = np.array([gp[0], gp[1], 0.0])
    state, ok = grasp(state, seed=grasp_seed)
    assert ok
    if offset is not None:
        state.grasp_offset = np.asarray(offset, dtype=np.float64)
        state.gripper_pose[2] = -state.grasp_offset[1]  # upright peg
    if tilt is not None:
        state.grasp_offset = np.array([state.grasp_offset[0], 0.0])
        state.gripper_pose[2] = tilt
    for _ in range(40):
        state, _ = step(state, (0.0, 2.0, 0.0))
    for _ in range(200):
        tip = state.peg_pose
        state, _ = step(state, (np.clip(-tip[0], -2, 2), 0.0, 0.0))
        if abs(state.peg_pose[0]) < 1e-8:
            break
    while state.peg_pose[1] > hover_height:
        drop = max(-2.0, hover_height - state.peg_pose[1])
        state, _ = step(state, (0.0, drop, 0.0))
    return state


@pytest.fixture
def hover_state():
    return make_hover_state()

from .geometry import (
    GEOMETRY_NAMES,
    ConfigError,
    GeometrySpec,
    WallProfile,
    make_geometry,
)
from .config import SimConfig, default_config
from .contact import (
    RESOLVE_ITERS,
    RESOLVE_TOL,
    Environment,
    RawContact,
    detect_contacts,
    max_penetration,
    peg_polygon,
    resolve_translation,
)
from .state import (
    ContactForce,
    ContactWrench,
    FrameSnapshot,
    SimState,
    StepResult,
    TraceWriter,
)
from .world import (
    HOLE_X,
    OBS_DIM,
    InputError,
    ProtocolError,
    check_success,
    grasp,
    grip_point,
    move_gripper,
    observe,
    relocate_gripper,
    render_frame,
    reset,
    step,
)

__all__ = [
    "GEOMETRY_NAMES",
    "HOLE_X",
    "OBS_DIM",
    "RESOLVE_ITERS",
    "RESOLVE_TOL",
    "ConfigError",
    "ContactForce",
    "ContactWrench",
    "Environment",
    "FrameSnapshot",
    "GeometrySpec",
    "InputError",
    "ProtocolError",
    "RawContact",
    "SimConfig",
    "SimState",
    "StepResult",
    "TraceWriter",
    "WallProfile",
    "check_success",
    "default_config",
    "detect_contacts",
    "grasp",
    "grip_point",
    "make_geometry",
    "max_penetration",
    "move_gripper",
    "observe",
    "peg_polygon",
    "relocate_gripper",
    "render_frame",
    "reset",
    "resolve_translation",
    "step",
]

"""Deterministic quadcopter simulation with potential-field control.

A velocity command is shaped as the negative gradient of artificial
attractive/repulsive potentials over the target and obstacle geometry;
the extended controller adds velocity-space terms that damp the
approach and ignore obstacles the drone is already leaving behind.
"""

from .diagnostics import LyapunovReport, lyapunov_value, monitor
from .dynamics import (
    CascadeGains,
    MotorCommand,
    QuadParams,
    RigidBodyState,
    VelocityPlantConfig,
    accelerations,
    cascaded_plant_step,
    hover_speed,
    step,
    sum_forces,
    sum_torques,
    velocity_plant_step,
)
from .epfc import (
    closing_rate,
    closing_repulsive,
    epfc_command,
    to_body_frame,
    velocity_attractive,
    velocity_repulsive,
    yaw_to_face_target,
)
from .frames import (
    Attitude,
    GimbalLockError,
    body_to_earth,
    earth_to_body,
    rot_full,
    rot_pitch,
    rot_roll,
    rot_yaw,
    vec3,
    wrap_angle,
)
from .fileio import load_scenario, save_scenario, write_metrics, write_trajectory
from .metrics import ComparisonReport, RunMetrics, compare, compute_run_metrics
from .pfc import Obstacle, PfcGains, attractive_velocity, pfc_command, repulsive_velocity
from .scenario import (
    ParametricPath,
    Scenario,
    SimulationAbort,
    StaticPoint,
    TrajectoryLog,
    Waypoint,
    WaypointCourse,
    builtin_scenarios,
    run,
    target_state,
)

__version__ = "0.1.0"

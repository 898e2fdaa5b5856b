"""Mission definitions and the simulation loop.

A Scenario bundles a target specification, an obstacle field, gains,
a plant choice and timing into one value; ``run`` executes it into a
TrajectoryLog of per-step records.  Everything is deterministic: the
only randomness is the seeded obstacle placement of the multi-obstacle
builtin, and identical scenarios produce bit-identical logs.

Courses are planar: waypoints carry x, y and the altitude is held at a
fixed setpoint by the same controller acting in z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .dynamics import (
    CascadeGains,
    QuadParams,
    RigidBodyState,
    VelocityPlantConfig,
    cascaded_plant_step,
    velocity_plant_step,
)
from .epfc import epfc_breakdown, pfc_breakdown, to_body_frame, yaw_to_face_target
from .frames import Attitude, rot_yaw, wrap_angle
from .pfc import Obstacle, PfcGains, stack_obstacles

CONTROLLERS = ("pfc", "epfc")
PLANTS = ("kinematic", "lag", "full")

# Bits of the per-record gates word (waypoint index lives in bits 8+).
GATE_POS_REP = 1
GATE_VEL_REP = 2
GATE_CLOSE_REP = 4
EVENT_ADVANCE = 8
EVENT_ARRIVAL = 16
FLAG_HEADING_HOLD = 32
FLAG_MIX_SAT = 64
WP_INDEX_SHIFT = 8

# P gain of the heading loop used when a scenario faces the target.
FACE_TARGET_GAIN = 1.5


class SimulationAbort(RuntimeError):
    """Non-finite state detected while stepping a scenario."""

    def __init__(self, record_index: int):
        super().__init__(f"non-finite state at record {record_index}")
        self.record_index = record_index


@dataclass(frozen=True)
class Waypoint:
    position: tuple[float, float, float]
    dwell: float = 0.0

    def __post_init__(self):
        if self.dwell < 0:
            raise ValueError("Waypoint.dwell must be >= 0")


@dataclass(frozen=True)
class StaticPoint:
    point: tuple[float, float, float]


@dataclass(frozen=True)
class WaypointCourse:
    """Sequence of waypoints with a dwell at each.

    advance="on_arrival": the next waypoint becomes active once the
    drone has come within arrival_radius and the dwell has elapsed
    since that first arrival.  advance="on_schedule": each waypoint is
    simply held for its dwell duration regardless of the drone.
    """

    waypoints: tuple[Waypoint, ...]
    advance: str = "on_arrival"
    arrival_radius: float = 0.15

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("WaypointCourse needs at least one waypoint")
        if self.advance not in ("on_arrival", "on_schedule"):
            raise ValueError(f"unknown advance rule {self.advance!r}")
        if self.arrival_radius <= 0:
            raise ValueError("arrival_radius must be > 0")


@dataclass(frozen=True)
class ParametricPath:
    """Piecewise-linear path traversed at constant speed.

    Closed paths loop forever; open paths stop at the last vertex with
    zero velocity.  Velocity is the exact segment derivative, so its
    magnitude equals the configured speed except at corners.
    """

    vertices: tuple[tuple[float, float, float], ...]
    speed: float
    closed: bool = True

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("ParametricPath needs at least two vertices")
        if self.speed <= 0:
            raise ValueError("ParametricPath.speed must be > 0")


TargetSpec = Union[StaticPoint, WaypointCourse, ParametricPath]


def _path_tables(path: ParametricPath):
    pts = np.array(path.vertices, dtype=float)
    if path.closed:
        pts = np.vstack([pts, pts[0]])
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    if np.any(seg_len == 0):
        raise ValueError("ParametricPath has a zero-length segment")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    return pts, seg, seg_len, cum


def target_state(spec: TargetSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Target position and exact velocity at time t.

    Waypoint courses are interpreted on their dwell schedule here (each
    waypoint held for its dwell, the last held forever, teleporting
    between them with zero velocity); arrival-gated advancement needs
    the drone state and lives in the simulation loop.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(spec, StaticPoint):
        return np.array(spec.point, dtype=float), np.zeros(3)
    if isinstance(spec, WaypointCourse):
        remaining = t
        for wp in spec.waypoints[:-1]:
            if remaining < wp.dwell:
                return np.array(wp.position, dtype=float), np.zeros(3)
            remaining -= wp.dwell
        return np.array(spec.waypoints[-1].position, dtype=float), np.zeros(3)
    if isinstance(spec, ParametricPath):
        pts, seg, seg_len, cum = _path_tables(spec)
        total = cum[-1]
        s = spec.speed * t
        if spec.closed:
            s = s % total
        elif s >= total:
            return pts[-1].copy(), np.zeros(3)
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(seg) - 1)
        frac = (s - cum[i]) / seg_len[i]
        return pts[i] + frac * seg[i], spec.speed * seg[i] / seg_len[i]
    raise TypeError(f"unknown target spec {type(spec).__name__}")


class TargetTracker:
    """Stateful target playback for the simulation loop.

    Tracks waypoint arrival/advance events; for static points and
    parametric paths it simply defers to target_state.
    """

    def __init__(self, spec: TargetSpec):
        self.spec = spec
        self.index = 0
        self.arrived_at: Optional[float] = None
        self.arrival_times: dict[int, float] = {}
        self.advance_steps: list[tuple[int, int, float]] = []

    def update(self, step_index: int, t: float, p_drone: np.ndarray):
        """Returns (target position, target velocity, event bits)."""
        events = 0
        if not isinstance(self.spec, WaypointCourse):
            p_t, v_t = target_state(self.spec, t)
            return p_t, v_t, events
        course = self.spec
        if course.advance == "on_schedule":
            p_t, v_t = target_state(course, t)
            index = self._schedule_index(t)
            if index != self.index:
                self.index = index
                self.advance_steps.append((step_index, index, t))
                events |= EVENT_ADVANCE
            if index not in self.arrival_times and (
                np.linalg.norm(p_drone - p_t) <= course.arrival_radius
            ):
                self.arrival_times[index] = t
                events |= EVENT_ARRIVAL
            return p_t, v_t, events
        wp = course.waypoints[self.index]
        p_t = np.array(wp.position, dtype=float)
        if self.arrived_at is None and (
            np.linalg.norm(p_drone - p_t) <= course.arrival_radius
        ):
            self.arrived_at = t
            self.arrival_times[self.index] = t
            events |= EVENT_ARRIVAL
        if (
            self.arrived_at is not None
            and t - self.arrived_at >= wp.dwell
            and self.index < len(course.waypoints) - 1
        ):
            self.index += 1
            self.arrived_at = None
            self.advance_steps.append((step_index, self.index, t))
            events |= EVENT_ADVANCE
            p_t = np.array(course.waypoints[self.index].position, dtype=float)
            if np.linalg.norm(p_drone - p_t) <= course.arrival_radius:
                self.arrived_at = t
                self.arrival_times[self.index] = t
                events |= EVENT_ARRIVAL
        return p_t, np.zeros(3), events

    def _schedule_index(self, t: float) -> int:
        remaining = t
        for i, wp in enumerate(self.spec.waypoints[:-1]):
            if remaining < wp.dwell:
                return i
            remaining -= wp.dwell
        return len(self.spec.waypoints) - 1


@dataclass(frozen=True)
class Scenario:
    """A complete, runnable mission description."""

    name: str
    target: TargetSpec
    obstacles: tuple[Obstacle, ...] = ()
    gains: PfcGains = field(default_factory=PfcGains)
    controller: str = "epfc"
    plant: str = "lag"
    lag: VelocityPlantConfig = field(default_factory=VelocityPlantConfig)
    quad: QuadParams = field(default_factory=QuadParams)
    cascade: CascadeGains = field(default_factory=CascadeGains)
    dt: float = 0.005
    t_end: float = 60.0
    seed: int = 0
    standoff: float = 0.0
    start: tuple[float, float, float] = (0.0, 0.0, -1.0)
    z_setpoint: float = -1.0
    face_target: bool = False
    provenance: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if self.plant not in PLANTS:
            raise ValueError(f"plant must be one of {PLANTS}")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.standoff < 0:
            raise ValueError("standoff must be >= 0")
        self.gains.validate()
        self.lag.validate()
        self.quad.validate()
        self.cascade.validate()


@dataclass
class TrajectoryLog:
    """Per-step records of one simulation run, as parallel arrays.

    target_p is the point the controller was actually steering to (the
    standoff-adjusted goal; identical to the raw target when the
    standoff is zero).  The gates word packs the term-activity bits,
    advance/arrival events and flags in its low byte and the active
    waypoint index in bits 8+.
    """

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    att: np.ndarray
    target_p: np.ndarray
    target_v: np.ndarray
    cmd_earth: np.ndarray
    cmd_body: np.ndarray
    term_att_p: np.ndarray
    term_rep_p: np.ndarray
    term_att_v: np.ndarray
    term_rep_v: np.ndarray
    term_close: np.ndarray
    gates: np.ndarray
    sat: np.ndarray
    scenario_name: str = ""
    controller: str = ""
    plant: str = ""
    dt: float = 0.0
    target_kind: str = ""
    advance_steps: list = field(default_factory=list)
    arrival_times: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def wp_index(self) -> np.ndarray:
        return self.gates >> WP_INDEX_SHIFT


def _make_plant(scenario: Scenario):
    dt = scenario.dt
    if scenario.plant == "kinematic":

        def step_fn(state, v_cmd_body, yaw_rate_cmd):
            v_e = rot_yaw(state.att.yaw) @ v_cmd_body
            yaw = wrap_angle(state.att.yaw + yaw_rate_cmd * dt)
            new = RigidBodyState(
                p=state.p + v_e * dt, v=v_e,
                att=Attitude(0.0, 0.0, yaw),
                omega=np.array([0.0, 0.0, yaw_rate_cmd]),
            )
            return new, 0

        return step_fn
    if scenario.plant == "lag":

        def step_fn(state, v_cmd_body, yaw_rate_cmd):
            return velocity_plant_step(state, v_cmd_body, yaw_rate_cmd, scenario.lag, dt), 0

        return step_fn

    def step_fn(state, v_cmd_body, yaw_rate_cmd):
        new, mix_sat = cascaded_plant_step(
            state, v_cmd_body, yaw_rate_cmd, scenario.cascade, scenario.quad, dt
        )
        return new, FLAG_MIX_SAT if mix_sat else 0

    return step_fn


def run(scenario: Scenario) -> TrajectoryLog:
    """Execute a scenario into a trajectory log.

    Fixed-step loop: read the target, form the potential-field command
    in the earth frame, rotate it into the body frame through the
    current yaw, step the plant, and record everything.  Aborts with
    SimulationAbort if the state ever goes non-finite.
    """
    scenario.validate()
    dt = scenario.dt
    n_steps = int(round(scenario.t_end / dt)) if scenario.t_end > 0 else 0
    n_records = n_steps + 1

    p_obs0, v_obs, _ = stack_obstacles(scenario.obstacles)
    breakdown_fn = epfc_breakdown if scenario.controller == "epfc" else pfc_breakdown
    plant_step = _make_plant(scenario)
    tracker = TargetTracker(scenario.target)

    state = RigidBodyState.at_rest(np.array(scenario.start, dtype=float))

    t_arr = np.empty(n_records)
    p_arr = np.empty((n_records, 3))
    v_arr = np.empty((n_records, 3))
    att_arr = np.empty((n_records, 3))
    tp_arr = np.empty((n_records, 3))
    tv_arr = np.empty((n_records, 3))
    ce_arr = np.empty((n_records, 3))
    cb_arr = np.empty((n_records, 3))
    term_arrs = {k: np.empty((n_records, 3)) for k in
                 ("att_p", "rep_p", "att_v", "rep_v", "close")}
    gates_arr = np.zeros(n_records, dtype=np.uint32)
    sat_arr = np.zeros(n_records, dtype=bool)

    for k in range(n_records):
        t = k * dt
        p_t_raw, v_t, events = tracker.update(k, t, state.p)

        goal = p_t_raw
        if scenario.standoff > 0.0:
            bearing = state.p - p_t_raw
            dist = np.linalg.norm(bearing)
            if dist > scenario.gains.eps_dist:
                goal = p_t_raw + scenario.standoff * bearing / dist
            else:
                events |= FLAG_HEADING_HOLD

        p_obs_t = p_obs0 + v_obs * t if len(p_obs0) else p_obs0
        bd = breakdown_fn(state.p, state.v, goal, v_t, p_obs_t, v_obs, scenario.gains)

        yaw = state.att.yaw
        cmd_body = to_body_frame(bd.command, yaw)
        yaw_rate_cmd = 0.0
        if scenario.face_target:
            heading = yaw_to_face_target(state.p, p_t_raw, scenario.gains.eps_dist)
            if heading is None:
                events |= FLAG_HEADING_HOLD
            else:
                yaw_rate_cmd = FACE_TARGET_GAIN * wrap_angle(heading - yaw)

        gates = events
        if bool(bd.pos_rep_active):
            gates |= GATE_POS_REP
        if bool(bd.vel_rep_active):
            gates |= GATE_VEL_REP
        if bool(bd.close_active):
            gates |= GATE_CLOSE_REP
        gates |= tracker.index << WP_INDEX_SHIFT

        t_arr[k] = t
        p_arr[k] = state.p
        v_arr[k] = state.v
        att_arr[k] = state.att.as_array()
        tp_arr[k] = goal
        tv_arr[k] = v_t
        ce_arr[k] = bd.command
        cb_arr[k] = cmd_body
        term_arrs["att_p"][k] = bd.att_p
        term_arrs["rep_p"][k] = bd.rep_p
        term_arrs["att_v"][k] = bd.att_v
        term_arrs["rep_v"][k] = bd.rep_v
        term_arrs["close"][k] = bd.close
        sat_arr[k] = bool(bd.saturated)

        if k < n_steps:
            state, extra = plant_step(state, cmd_body, yaw_rate_cmd)
            gates |= extra
            if not state.is_finite():
                gates_arr[k] = gates
                raise SimulationAbort(k + 1)
        gates_arr[k] = gates

    return TrajectoryLog(
        t=t_arr, p=p_arr, v=v_arr, att=att_arr, target_p=tp_arr, target_v=tv_arr,
        cmd_earth=ce_arr, cmd_body=cb_arr,
        term_att_p=term_arrs["att_p"], term_rep_p=term_arrs["rep_p"],
        term_att_v=term_arrs["att_v"], term_rep_v=term_arrs["rep_v"],
        term_close=term_arrs["close"], gates=gates_arr, sat=sat_arr,
        scenario_name=scenario.name, controller=scenario.controller,
        plant=scenario.plant, dt=dt,
        target_kind=type(scenario.target).__name__,
        advance_steps=list(tracker.advance_steps),
        arrival_times=dict(tracker.arrival_times),
    )


def _course(coords, dwell: float, z: float) -> WaypointCourse:
    return WaypointCourse(
        waypoints=tuple(Waypoint((x, y, z), dwell) for x, y in coords)
    )


def _seeded_obstacles(
    n: int, seed: int, z: float, keep_clear: list, radius: float = 0.25
) -> tuple[Obstacle, ...]:
    """Place n obstacles uniformly in the course area, seeded.

    Rejects positions within 1.2 m of any protected point (waypoints,
    start) and within 1.6 m of an already placed obstacle.  The margins
    keep every waypoint reachable and every obstacle gap wide enough to
    pass: a gradient field has no escape strategy for box canyons, so
    the generator must not build any.
    """
    rng = np.random.default_rng(seed)
    clear = np.array(keep_clear, dtype=float)
    placed: list[np.ndarray] = []
    tries = 0
    while len(placed) < n:
        tries += 1
        if tries > 20000:
            raise RuntimeError("obstacle placement did not converge")
        cand = np.array([rng.uniform(-3.5, 3.5), rng.uniform(-2.2, 2.2)])
        if np.min(np.linalg.norm(clear - cand, axis=1)) < 1.2:
            continue
        if placed and min(np.linalg.norm(q - cand) for q in placed) < 1.5:
            continue
        placed.append(cand)
    return tuple(
        Obstacle(position=(float(q[0]), float(q[1]), z), radius=radius) for q in placed
    )


def builtin_scenarios() -> dict[str, Scenario]:
    """Named, ready-to-run scenarios.

    sim-course / exp-course are the rectangular waypoint loops used for
    the controller comparison (the second at lab scale), multi-obstacle
    adds a seeded random obstacle field to the first, and the
    static-target / dynamic-square family mirrors the wand-tracking
    tests with a 1 m standoff.

    The earth z axis points down, so the courses fly at z = -1 (one
    meter above the origin).
    """
    z = -1.0
    sim_wps = [(2.5, -1.0), (2.5, 1.0), (-2.5, 1.0), (-2.5, -1.0)]
    exp_wps = [(1.5, -0.5), (1.5, 0.5), (-1.5, 0.5), (-1.5, -0.5)]
    scenarios = {}
    scenarios["sim-course"] = Scenario(
        name="sim-course",
        target=_course(sim_wps, dwell=2.0, z=z),
        obstacles=(Obstacle(position=(1.0, 1.0, z)),),
        t_end=90.0,
    )
    scenarios["exp-course"] = Scenario(
        name="exp-course",
        target=_course(exp_wps, dwell=2.0, z=z),
        obstacles=(Obstacle(position=(0.0, 0.5, z)),),
        t_end=90.0,
    )
    # Softer repulsion here: six influence fields overlap near the
    # waypoints, and their sum must stay below the attraction inside
    # the arrival radius or the course can never be completed.
    seed = 1
    scenarios["multi-obstacle"] = Scenario(
        name="multi-obstacle",
        target=_course(sim_wps, dwell=2.0, z=z),
        obstacles=_seeded_obstacles(
            6, seed, z, keep_clear=[*sim_wps, (0.0, 0.0)]
        ),
        gains=PfcGains(k_rep_p=0.2),
        seed=seed,
        t_end=120.0,
    )
    scenarios["static-target"] = Scenario(
        name="static-target",
        target=StaticPoint((4.2, 0.0, z)),
        standoff=1.0,
        t_end=25.0,
    )
    scenarios["static-target-obstacle"] = Scenario(
        name="static-target-obstacle",
        target=StaticPoint((5.2, 0.0, z)),
        # nudged off the exact drone-target line; perfectly symmetric
        # head-on geometry is a stagnation point of any potential field
        obstacles=(Obstacle(position=(2.6, 0.1, z)),),
        standoff=1.0,
        t_end=30.0,
    )
    scenarios["dynamic-square"] = Scenario(
        name="dynamic-square",
        target=ParametricPath(
            vertices=(
                (1.5, -0.5, z), (1.5, 0.5, z), (-1.5, 0.5, z), (-1.5, -0.5, z),
            ),
            speed=0.25,
        ),
        standoff=1.0,
        face_target=True,
        t_end=70.0,
    )
    return scenarios


def rebuild_multi_obstacle(seed: int, n: int = 6) -> Scenario:
    """The multi-obstacle builtin with a different placement seed."""
    base = builtin_scenarios()["multi-obstacle"]
    sim_wps = [(2.5, -1.0), (2.5, 1.0), (-2.5, 1.0), (-2.5, -1.0)]
    return replace(
        base,
        seed=seed,
        obstacles=_seeded_obstacles(n, seed, -1.0, keep_clear=[*sim_wps, (0.0, 0.0)]),
    )

"""Quadcopter rigid-body plant and simplified controller-test plants.

Three plant models are provided:

* ``step`` — full Newton-Euler rigid body driven by four motor speeds,
  integrated with fixed-step RK4.  By default it keeps the small-angle
  body-frame force model verbatim (gravity pinned to +z_B), which is
  exact at level attitude but does not translate under tilt; pass
  ``rotate_gravity=True`` to keep gravity in the earth frame so that
  tilting produces lateral acceleration.
* ``velocity_plant_step`` — first-order lag on a commanded velocity,
  the default stand-in for a closed-loop drone velocity interface.
* ``cascaded_plant_step`` — velocity command -> tilt -> attitude PD ->
  motor mixing driving the full rigid body (with rotated gravity).

All plants are deterministic: identical inputs give bit-identical
outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import Attitude, Vec3, rotation_from_angles, rot_yaw, wrap_angle

# Largest admissible integrator step.
DT_MAX = 0.05


@dataclass(frozen=True)
class QuadParams:
    """Physical constants of the vehicle.

    Defaults are public ARDrone-class figures with thrust/moment
    coefficients chosen so hover sits near 360 rad/s; they are recorded
    in every run report and are not measured ground truth.
    """

    m: float = 0.43          # kg
    g: float = 9.81          # m/s^2
    i_xx: float = 2.24e-3    # kg m^2
    i_yy: float = 2.24e-3    # kg m^2
    i_zz: float = 4.5e-3     # kg m^2
    k_t: float = 8.14e-6     # N s^2/rad^2, thrust per squared motor speed
    k_m: float = 1.3e-7      # N m s^2/rad^2, drag moment per squared motor speed
    arm_length: float = 0.178  # m
    omega_max: float = 800.0   # rad/s, motor speed ceiling

    def validate(self) -> None:
        for name in ("m", "g", "i_xx", "i_yy", "i_zz", "arm_length", "omega_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"QuadParams.{name} must be > 0")
        for name in ("k_t", "k_m"):
            if getattr(self, name) < 0:
                raise ValueError(f"QuadParams.{name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "m": self.m, "g": self.g, "i_xx": self.i_xx, "i_yy": self.i_yy,
            "i_zz": self.i_zz, "k_t": self.k_t, "k_m": self.k_m,
            "arm_length": self.arm_length, "omega_max": self.omega_max,
        }


def hover_speed(params: QuadParams) -> float:
    """Motor speed at which total thrust equals weight."""
    return math.sqrt(params.m * params.g / (4.0 * params.k_t))


@dataclass(frozen=True)
class MotorCommand:
    """Angular speeds of the four motors, rad/s.

    Motors 1/2 sit on the body y arm and 3/4 on the body x arm; 1 and 2
    spin opposite to 3 and 4 so drag moments cancel at equal speeds.
    """

    omega1: float
    omega2: float
    omega3: float
    omega4: float

    def validate(self, params: QuadParams) -> None:
        for i, w in enumerate(self.speeds(), start=1):
            if not math.isfinite(w) or w < 0 or w > params.omega_max:
                raise ValueError(
                    f"motor {i} speed {w!r} outside [0, {params.omega_max}]"
                )

    def speeds(self) -> tuple[float, float, float, float]:
        return (self.omega1, self.omega2, self.omega3, self.omega4)

    @classmethod
    def hover(cls, params: QuadParams) -> "MotorCommand":
        w = hover_speed(params)
        return cls(w, w, w, w)

    @classmethod
    def zero(cls) -> "MotorCommand":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass
class RigidBodyState:
    """Twelve-state rigid body: position/velocity in E, attitude, body rates.

    Body rates are identified with Euler-angle rates (roll_rate,
    pitch_rate, yaw_rate) — the small-angle approximation built into
    the equations of motion used here.
    """

    p: Vec3
    v: Vec3
    att: Attitude
    omega: Vec3

    @classmethod
    def at_rest(cls, p: Vec3) -> "RigidBodyState":
        return cls(p=np.array(p, dtype=float), v=np.zeros(3), att=Attitude(), omega=np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.att.as_array(), self.omega])

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "RigidBodyState":
        return cls(
            p=y[0:3].copy(),
            v=y[3:6].copy(),
            att=Attitude(wrap_angle(y[6]), wrap_angle(y[7]), wrap_angle(y[8])),
            omega=y[9:12].copy(),
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.att.as_array()))
            and np.all(np.isfinite(self.omega))
        )


@dataclass(frozen=True)
class WrenchB:
    """Net body-frame force and torque."""

    force: Vec3
    torque: Vec3


def sum_forces(cmd: MotorCommand, params: QuadParams) -> Vec3:
    """Net body-frame force: weight along +z_B minus total thrust.

    Small-angle model: gravity is taken along the body z axis.
    """
    cmd.validate(params)
    w1, w2, w3, w4 = cmd.speeds()
    total_sq = w1 * w1 + w2 * w2 + w3 * w3 + w4 * w4
    return np.array([0.0, 0.0, params.m * params.g - params.k_t * total_sq])


def sum_torques(cmd: MotorCommand, params: QuadParams) -> Vec3:
    """Net body-frame torque from differential thrust and drag moments."""
    cmd.validate(params)
    w1, w2, w3, w4 = cmd.speeds()
    s1, s2, s3, s4 = w1 * w1, w2 * w2, w3 * w3, w4 * w4
    return np.array(
        [
            params.k_t * (s3 - s4) * params.arm_length,
            params.k_t * (s1 - s2) * params.arm_length,
            -params.k_m * (s1 + s2 - s3 - s4),
        ]
    )


def body_wrench(cmd: MotorCommand, params: QuadParams) -> WrenchB:
    return WrenchB(force=sum_forces(cmd, params), torque=sum_torques(cmd, params))


def accelerations(
    state: RigidBodyState, cmd: MotorCommand, params: QuadParams
) -> tuple[Vec3, Vec3]:
    """Body-frame linear and angular acceleration of the quadcopter.

    Linear: thrust/weight along z_B only (small-angle force model).
    Angular: differential thrust and drag torques minus the gyroscopic
    coupling of the diagonal inertia with the body rates.
    """
    cmd.validate(params)
    w1, w2, w3, w4 = cmd.speeds()
    s1, s2, s3, s4 = w1 * w1, w2 * w2, w3 * w3, w4 * w4
    roll_rate, pitch_rate, yaw_rate = state.omega
    a_b = np.array(
        [0.0, 0.0, params.g - params.k_t * (s1 + s2 + s3 + s4) / params.m]
    )
    alpha_b = np.array(
        [
            (params.k_t * (s3 - s4) * params.arm_length
             - pitch_rate * yaw_rate * (params.i_zz - params.i_yy)) / params.i_xx,
            (params.k_t * (s1 - s2) * params.arm_length
             - roll_rate * yaw_rate * (params.i_xx - params.i_zz)) / params.i_yy,
            (-params.k_m * (s1 + s2 - s3 - s4)
             - pitch_rate * roll_rate * (params.i_yy - params.i_xx)) / params.i_zz,
        ]
    )
    return a_b, alpha_b


def step(
    state: RigidBodyState,
    cmd: MotorCommand,
    params: QuadParams,
    dt: float,
    rotate_gravity: bool = False,
) -> RigidBodyState:
    """Advance the rigid body one RK4 step of length dt.

    With rotate_gravity=False the body-frame acceleration (gravity
    pinned to +z_B) is rotated wholesale into the earth frame; with
    True only the thrust is rotated and gravity stays on earth z.
    """
    if not (0.0 < dt <= DT_MAX):
        raise ValueError(f"dt must be in (0, {DT_MAX}], got {dt}")
    cmd.validate(params)
    w1, w2, w3, w4 = cmd.speeds()
    s1, s2, s3, s4 = w1 * w1, w2 * w2, w3 * w3, w4 * w4
    a_thrust_z = -params.k_t * (s1 + s2 + s3 + s4) / params.m
    tau_x = params.k_t * (s3 - s4) * params.arm_length
    tau_y = params.k_t * (s1 - s2) * params.arm_length
    tau_z = -params.k_m * (s1 + s2 - s3 - s4)
    g = params.g
    i_xx, i_yy, i_zz = params.i_xx, params.i_yy, params.i_zz

    def deriv(y: np.ndarray) -> np.ndarray:
        rot = rotation_from_angles(y[6], y[7], y[8])
        if rotate_gravity:
            a_e = rot @ np.array([0.0, 0.0, a_thrust_z])
            a_e[2] += g
        else:
            a_e = rot @ np.array([0.0, 0.0, g + a_thrust_z])
        wx, wy, wz = y[9], y[10], y[11]
        alpha = np.array(
            [
                (tau_x - wy * wz * (i_zz - i_yy)) / i_xx,
                (tau_y - wx * wz * (i_xx - i_zz)) / i_yy,
                (tau_z - wy * wx * (i_yy - i_xx)) / i_zz,
            ]
        )
        out = np.empty(12)
        out[0:3] = y[3:6]
        out[3:6] = a_e
        out[6:9] = y[9:12]
        out[9:12] = alpha
        return out

    y0 = state.as_vector()
    k1 = deriv(y0)
    k2 = deriv(y0 + 0.5 * dt * k1)
    k3 = deriv(y0 + 0.5 * dt * k2)
    k4 = deriv(y0 + dt * k3)
    y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return RigidBodyState.from_vector(y1)


@dataclass(frozen=True)
class VelocityPlantConfig:
    """First-order closed-loop velocity response, per axis."""

    tau_xy: float = 1.0    # s, horizontal velocity lag
    tau_z: float = 1.0     # s, vertical velocity lag
    tau_yaw: float = 0.5   # s, yaw-rate lag
    v_max: float = 2.0     # m/s, achievable speed ceiling

    def validate(self) -> None:
        for name in ("tau_xy", "tau_z", "tau_yaw", "v_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"VelocityPlantConfig.{name} must be > 0")

    def to_dict(self) -> dict:
        return {"tau_xy": self.tau_xy, "tau_z": self.tau_z,
                "tau_yaw": self.tau_yaw, "v_max": self.v_max}


def velocity_plant_step(
    state: RigidBodyState,
    v_cmd_body: Vec3,
    yaw_rate_cmd: float,
    cfg: VelocityPlantConfig,
    dt: float,
) -> RigidBodyState:
    """First-order-lag velocity plant.

    The commanded body velocity is rotated through the current yaw,
    each earth axis relaxes toward it exponentially (exact discrete
    update, so constant commands reproduce the closed-form response),
    and speed is clamped to v_max.  Roll and pitch stay level.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    yaw = state.att.yaw
    v_cmd_e = rot_yaw(yaw) @ np.asarray(v_cmd_body, dtype=float)
    decay_xy = math.exp(-dt / cfg.tau_xy)
    decay_z = math.exp(-dt / cfg.tau_z)
    v_new = np.empty(3)
    v_new[0] = v_cmd_e[0] + (state.v[0] - v_cmd_e[0]) * decay_xy
    v_new[1] = v_cmd_e[1] + (state.v[1] - v_cmd_e[1]) * decay_xy
    v_new[2] = v_cmd_e[2] + (state.v[2] - v_cmd_e[2]) * decay_z
    speed = math.sqrt(v_new[0] ** 2 + v_new[1] ** 2 + v_new[2] ** 2)
    if speed > cfg.v_max:
        v_new *= cfg.v_max / speed
    p_new = state.p + 0.5 * dt * (state.v + v_new)
    rate = state.omega[2]
    rate_new = yaw_rate_cmd + (rate - yaw_rate_cmd) * math.exp(-dt / cfg.tau_yaw)
    yaw_new = wrap_angle(yaw + 0.5 * dt * (rate + rate_new))
    return RigidBodyState(
        p=p_new, v=v_new, att=Attitude(0.0, 0.0, yaw_new),
        omega=np.array([0.0, 0.0, rate_new]),
    )


@dataclass(frozen=True)
class CascadeGains:
    """Inner-loop gains for the cascaded full-dynamics plant."""

    kp_vel: float = 1.2       # 1/s, velocity error -> desired accel
    kp_vz: float = 2.0        # 1/s, vertical velocity error -> accel
    tilt_max: float = 0.35    # rad, commanded roll/pitch bound
    kp_att: float = 40.0      # 1/s^2, attitude error -> angular accel
    kd_att: float = 12.0      # 1/s, attitude rate damping
    kp_yaw_rate: float = 8.0  # 1/s, yaw-rate error -> angular accel

    def validate(self) -> None:
        for name in ("kp_vel", "kp_vz", "tilt_max", "kp_att", "kd_att", "kp_yaw_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"CascadeGains.{name} must be > 0")

    def to_dict(self) -> dict:
        return {"kp_vel": self.kp_vel, "kp_vz": self.kp_vz,
                "tilt_max": self.tilt_max, "kp_att": self.kp_att,
                "kd_att": self.kd_att, "kp_yaw_rate": self.kp_yaw_rate}


def mix_motors(
    thrust: float, torque: Vec3, params: QuadParams
) -> tuple[MotorCommand, bool]:
    """Invert the force/torque model for the four squared motor speeds.

    Negative squared speeds are clamped to zero and speeds above the
    motor ceiling are clamped down; either clamp sets the saturation
    flag.  thrust is the total thrust magnitude k_t * sum(omega_i^2).
    """
    s = thrust / params.k_t
    dx = torque[0] / (params.k_t * params.arm_length)
    dy = torque[1] / (params.k_t * params.arm_length)
    dz = -torque[2] / params.k_m if params.k_m > 0 else 0.0
    sq = np.array(
        [
            (s + dz) / 4.0 + dy / 2.0,
            (s + dz) / 4.0 - dy / 2.0,
            (s - dz) / 4.0 + dx / 2.0,
            (s - dz) / 4.0 - dx / 2.0,
        ]
    )
    saturated = bool(np.any(sq < 0.0))
    sq = np.maximum(sq, 0.0)
    speeds = np.sqrt(sq)
    if np.any(speeds > params.omega_max):
        saturated = True
        speeds = np.minimum(speeds, params.omega_max)
    return MotorCommand(*speeds), saturated


def cascaded_plant_step(
    state: RigidBodyState,
    v_cmd_body: Vec3,
    yaw_rate_cmd: float,
    gains: CascadeGains,
    params: QuadParams,
    dt: float,
) -> tuple[RigidBodyState, bool]:
    """Velocity command -> tilt -> attitude PD -> motor mixing -> rigid body.

    Returns the new state and a flag marking motor-mixing saturation.
    Gravity is kept in the earth frame here so tilt actually
    translates the vehicle.
    """
    yaw = state.att.yaw
    v_body = rot_yaw(yaw).T @ state.v
    a_des_x = gains.kp_vel * (v_cmd_body[0] - v_body[0])
    a_des_y = gains.kp_vel * (v_cmd_body[1] - v_body[1])
    a_des_z = gains.kp_vz * (v_cmd_body[2] - v_body[2])
    g = params.g
    pitch_des = max(-gains.tilt_max, min(gains.tilt_max, -a_des_x / g))
    roll_des = max(-gains.tilt_max, min(gains.tilt_max, a_des_y / g))
    torque = np.array(
        [
            params.i_xx * (gains.kp_att * (roll_des - state.att.roll)
                           - gains.kd_att * state.omega[0]),
            params.i_yy * (gains.kp_att * (pitch_des - state.att.pitch)
                           - gains.kd_att * state.omega[1]),
            params.i_zz * gains.kp_yaw_rate * (yaw_rate_cmd - state.omega[2]),
        ]
    )
    cos_tilt = max(0.5, math.cos(state.att.roll) * math.cos(state.att.pitch))
    thrust = max(0.0, params.m * (g - a_des_z) / cos_tilt)
    cmd, saturated = mix_motors(thrust, torque, params)
    new_state = step(state, cmd, params, dt, rotate_gravity=True)
    return new_state, saturated

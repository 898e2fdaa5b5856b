import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadfield.dynamics import (
    CascadeGains,
    MotorCommand,
    QuadParams,
    RigidBodyState,
    VelocityPlantConfig,
    accelerations,
    cascaded_plant_step,
    hover_speed,
    mix_motors,
    step,
    sum_forces,
    sum_torques,
    velocity_plant_step,
)
from quadfield.frames import Attitude, vec3

PARAMS = QuadParams()

speeds = st.floats(0.0, 700.0, allow_nan=False)


def hover_state(p=(0.0, 0.0, -1.0)):
    return RigidBodyState.at_rest(np.array(p))


# ---------------------------------------------------------------------------
# forces and torques

def test_sum_forces_free_fall():
    f = sum_forces(MotorCommand.zero(), PARAMS)
    assert np.allclose(f, [0, 0, PARAMS.m * PARAMS.g], atol=0)


def test_sum_forces_hover_balances_weight():
    # solve k_t * 4 * w^2 = m g by hand
    w = math.sqrt(PARAMS.m * PARAMS.g / (4 * PARAMS.k_t))
    f = sum_forces(MotorCommand(w, w, w, w), PARAMS)
    assert np.abs(f).max() < 1e-12
    assert hover_speed(PARAMS) == pytest.approx(w)


def test_sum_forces_double_hover_speed():
    w = 2.0 * hover_speed(PARAMS)
    f = sum_forces(MotorCommand(w, w, w, w), PARAMS)
    # 4 k_t (2 w_h)^2 = 4 m g, minus the m g weight term
    assert f[2] == pytest.approx(-3.0 * PARAMS.m * PARAMS.g, rel=1e-12)


def test_sum_torques_balanced():
    w = hover_speed(PARAMS)
    assert np.abs(sum_torques(MotorCommand(w, w, w, w), PARAMS)).max() == 0.0


def test_sum_torques_roll_sign():
    w = hover_speed(PARAMS)
    tau = sum_torques(MotorCommand(w, w, w + 20, w - 20), PARAMS)
    assert tau[0] > 0
    assert tau[1] == 0.0
    # motors 3/4 spin the same direction, so the drag moments shift too
    assert abs(tau[0]) > abs(tau[2])


def test_sum_torques_pure_yaw():
    w = hover_speed(PARAMS)
    tau = sum_torques(MotorCommand(w + 15, w + 15, w - 15, w - 15), PARAMS)
    assert tau[0] == 0.0 and tau[1] == 0.0
    expected = -PARAMS.k_m * 2 * ((w + 15) ** 2 - (w - 15) ** 2)
    assert tau[2] == pytest.approx(expected, rel=1e-12)


@given(speeds, speeds, speeds, speeds)
def test_no_yaw_moment_without_drag_coefficient(w1, w2, w3, w4):
    params = QuadParams(k_m=0.0)
    assert sum_torques(MotorCommand(w1, w2, w3, w4), params)[2] == 0.0


def test_motor_command_validation():
    with pytest.raises(ValueError):
        sum_forces(MotorCommand(-1.0, 0, 0, 0), PARAMS)
    with pytest.raises(ValueError):
        sum_forces(MotorCommand(0, 0, 0, PARAMS.omega_max + 1), PARAMS)


# ---------------------------------------------------------------------------
# accelerations against the assembled rigid-body equations

def assembled_oracle(state, cmd, params):
    """Independent path: wrench plus explicit inertia/cross-product algebra."""
    inertia = np.diag([params.i_xx, params.i_yy, params.i_zz])
    a = sum_forces(cmd, params) / params.m
    tau = sum_torques(cmd, params)
    gyro = np.cross(state.omega, inertia @ state.omega)
    alpha = np.linalg.solve(inertia, tau - gyro)
    return a, alpha


def test_accelerations_hover_equilibrium():
    a, alpha = accelerations(hover_state(), MotorCommand.hover(PARAMS), PARAMS)
    assert np.abs(a).max() < 1e-12 and np.abs(alpha).max() < 1e-12


def test_accelerations_free_fall():
    a, alpha = accelerations(hover_state(), MotorCommand.zero(), PARAMS)
    assert np.allclose(a, [0, 0, PARAMS.g], atol=0)
    assert np.abs(alpha).max() == 0.0


@settings(max_examples=200)
@given(
    st.tuples(speeds, speeds, speeds, speeds),
    st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3),
)
def test_accelerations_match_assembled_equations(ws, omega):
    state = RigidBodyState(
        p=np.zeros(3), v=np.zeros(3), att=Attitude(), omega=np.array(omega)
    )
    cmd = MotorCommand(*ws)
    a, alpha = accelerations(state, cmd, PARAMS)
    a_ref, alpha_ref = assembled_oracle(state, cmd, PARAMS)
    assert np.abs(a - a_ref).max() < 1e-12
    assert np.abs(alpha - alpha_ref).max() < 1e-12


# ---------------------------------------------------------------------------
# rigid-body integration

def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step(hover_state(), MotorCommand.hover(PARAMS), PARAMS, 0.0)
    with pytest.raises(ValueError):
        step(hover_state(), MotorCommand.hover(PARAMS), PARAMS, 1.0)


def test_hover_fixed_point_over_ten_seconds():
    state = hover_state()
    cmd = MotorCommand.hover(PARAMS)
    for _ in range(2000):
        state = step(state, cmd, PARAMS, 0.005)
    assert np.abs(state.p - [0, 0, -1.0]).max() < 1e-9
    assert np.abs(state.v).max() < 1e-9


def test_ballistic_drop_matches_closed_form():
    state = hover_state(p=(0, 0, 0))
    dt = 0.005
    for _ in range(200):
        state = step(state, MotorCommand.zero(), PARAMS, dt)
    expected = 0.5 * PARAMS.g * 1.0**2
    assert state.p[2] == pytest.approx(expected, rel=1e-6)


def tumbling_cmd():
    # off-hover thrust so the rotating attitude modulates an O(1)
    # acceleration; near-hover imbalances leave only roundoff to measure
    w = math.sqrt(1.3) * hover_speed(PARAMS)
    return MotorCommand(w + 2.0, w - 2.0, w + 1.5, w - 1.5)


def integrate(dt, t_end=1.0):
    state = hover_state()
    for _ in range(int(round(t_end / dt))):
        state = step(state, tumbling_cmd(), PARAMS, dt)
    return state.as_vector()


def test_rk4_convergence_order():
    y1, y2, y3 = integrate(0.008), integrate(0.004), integrate(0.002)
    e12 = np.linalg.norm(y1 - y2)
    e23 = np.linalg.norm(y2 - y3)
    order = math.log2(e12 / e23)
    assert order >= 3.8


def test_free_body_kinetic_energy_conserved():
    params = QuadParams(g=0.0)

    def energy(omega):
        return 0.5 * (
            params.i_xx * omega[0] ** 2
            + params.i_yy * omega[1] ** 2
            + params.i_zz * omega[2] ** 2
        )

    state = RigidBodyState(
        p=np.zeros(3), v=np.zeros(3), att=Attitude(),
        omega=np.array([0.3, 0.05, 0.4]),
    )
    e0 = energy(state.omega)
    for _ in range(10000):
        state = step(state, MotorCommand.zero(), params, 1e-3)
    assert abs(energy(state.omega) - e0) / e0 < 1e-6


def test_step_deterministic():
    a = integrate(0.005)
    b = integrate(0.005)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# first-order lag plant

CFG = VelocityPlantConfig()


def test_velocity_plant_fixed_point():
    state = RigidBodyState(
        p=np.zeros(3), v=vec3(0.4, -0.2, 0.1), att=Attitude(), omega=np.zeros(3)
    )
    out = velocity_plant_step(state, vec3(0.4, -0.2, 0.1), 0.0, CFG, 0.01)
    assert np.allclose(out.v, state.v, atol=1e-15)


def test_velocity_plant_step_response():
    cfg = VelocityPlantConfig(tau_xy=0.5)
    state = hover_state()
    for _ in range(100):
        state = velocity_plant_step(state, vec3(1, 0, 0), 0.0, cfg, 0.005)
    assert state.v[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-3)


def test_velocity_plant_saturation():
    state = hover_state()
    for _ in range(2000):
        state = velocity_plant_step(state, vec3(9.0, 0, 0), 0.0, CFG, 0.005)
        assert np.linalg.norm(state.v) <= CFG.v_max + 1e-9
    assert np.linalg.norm(state.v) == pytest.approx(CFG.v_max, abs=1e-9)


@given(st.tuples(*[st.floats(-30, 30, allow_nan=False)] * 3))
def test_velocity_plant_never_exceeds_v_max(cmd):
    state = hover_state()
    for _ in range(50):
        state = velocity_plant_step(state, np.array(cmd), 0.0, CFG, 0.02)
        assert np.linalg.norm(state.v) <= CFG.v_max + 1e-9


# ---------------------------------------------------------------------------
# cascaded plant

def test_mix_motors_round_trip():
    thrust = 1.3 * PARAMS.m * PARAMS.g
    torque = vec3(0.004, -0.003, 0.0011)
    cmd, saturated = mix_motors(thrust, torque, PARAMS)
    assert not saturated
    assert sum_forces(cmd, PARAMS)[2] == pytest.approx(
        PARAMS.m * PARAMS.g - thrust, abs=1e-9
    )
    assert np.abs(sum_torques(cmd, PARAMS) - torque).max() < 1e-9


def test_mix_motors_clamps_infeasible():
    # torque demand far beyond what the thrust level can support
    cmd, saturated = mix_motors(0.1, vec3(1.0, 0, 0), PARAMS)
    assert saturated
    cmd.validate(PARAMS)


def test_cascaded_hover_regulation():
    state = hover_state()
    gains = CascadeGains()
    for _ in range(2000):
        state, _ = cascaded_plant_step(state, np.zeros(3), 0.0, gains, PARAMS, 0.005)
    assert np.abs(state.p - [0, 0, -1.0]).max() < 0.05


def test_cascaded_velocity_step():
    state = hover_state()
    gains = CascadeGains()
    for _ in range(1600):
        state, _ = cascaded_plant_step(
            state, vec3(0.5, 0, 0), 0.0, gains, PARAMS, 0.005
        )
    assert state.v[0] == pytest.approx(0.5, abs=0.02)
    assert abs(state.v[1]) < 0.02

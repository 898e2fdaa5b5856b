import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadfield.pfc import (
    Obstacle,
    PfcGains,
    attractive_velocity,
    clamp_speed,
    pfc_command,
    repulsive_velocity,
)

GAINS = PfcGains()

coords = st.floats(-20.0, 20.0, allow_nan=False)
vectors = st.tuples(coords, coords, coords)


def central_difference(potential, point, h=1e-5):
    grad = np.zeros(3)
    for i in range(3):
        up, down = point.copy(), point.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (potential(up) - potential(down)) / (2 * h)
    return grad


def attract_potential(p, p_t, k):
    return 0.5 * k * np.sum((p - p_t) ** 2)


def repulse_potential(p, p_o, k):
    return 0.5 * k / np.sum((p - p_o) ** 2)


def test_attractive_zero_error():
    p = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(attractive_velocity(p, p, 1.0), np.zeros(3))


def test_attractive_hand_value():
    out = attractive_velocity(np.array([1.0, 0, 0]), np.zeros(3), 1.0)
    assert np.array_equal(out, [-1.0, 0.0, 0.0])


def test_attractive_matches_negative_gradient():
    rng = np.random.default_rng(42)
    for _ in range(100):
        p = rng.normal(0, 5, 3)
        p_t = rng.normal(0, 5, 3)
        analytic = attractive_velocity(p, p_t, GAINS.k_att_p)
        numeric = -central_difference(
            lambda q: attract_potential(q, p_t, GAINS.k_att_p), p
        )
        assert np.abs(analytic - numeric).max() < 1e-6 * max(
            1.0, np.linalg.norm(analytic)
        )


def test_repulsive_outside_cutoff():
    p_o = np.zeros(3)
    p_d = np.array([GAINS.influence_radius + 0.01, 0, 0])
    out = repulsive_velocity(p_d, p_o, GAINS.k_rep_p, GAINS.influence_radius)
    assert np.array_equal(out, np.zeros(3))


def test_repulsive_hand_value():
    out = repulsive_velocity(np.array([1.0, 0, 0]), np.zeros(3), 1.0, 2.0)
    assert np.allclose(out, [1.0, 0, 0], atol=0)


@given(vectors, vectors)
def test_repulsive_points_away_from_obstacle(p_d, p_o):
    p_d, p_o = np.array(p_d), np.array(p_o)
    out = repulsive_velocity(p_d, p_o, GAINS.k_rep_p, GAINS.influence_radius)
    assert np.dot(out, p_d - p_o) >= 0.0
    assert np.all(np.isfinite(out))


def test_repulsive_coincident_point_is_finite_zero():
    p = np.array([0.3, -0.2, 1.0])
    out = repulsive_velocity(p, p, GAINS.k_rep_p, GAINS.influence_radius)
    assert np.array_equal(out, np.zeros(3))


def test_repulsive_matches_negative_gradient_in_range():
    rng = np.random.default_rng(7)
    count = 0
    while count < 100:
        p_o = rng.normal(0, 3, 3)
        offset = rng.normal(0, 1.5, 3)
        dist = np.linalg.norm(offset)
        if not (0.3 < dist < GAINS.influence_radius - 0.1):
            continue
        count += 1
        p_d = p_o + offset
        analytic = repulsive_velocity(
            p_d, p_o, GAINS.k_rep_p, GAINS.influence_radius
        )
        numeric = -central_difference(
            lambda q: repulse_potential(q, p_o, GAINS.k_rep_p), p_d
        )
        assert np.abs(analytic - numeric).max() < 1e-6 * max(
            1.0, np.linalg.norm(analytic)
        )


def test_command_without_obstacles_is_attraction():
    p_d = np.array([0.3, -0.1, 0.0])
    p_t = np.array([0.5, 0.2, 0.0])
    out = pfc_command(p_d, p_t, [], GAINS)
    assert np.array_equal(out, attractive_velocity(p_d, p_t, GAINS.k_att_p))


def test_obstacle_between_reduces_closing_component():
    # saturation would flatten both branches; compare them unsaturated
    gains = PfcGains(v_cmd_max=50.0)
    p_d = np.zeros(3)
    p_t = np.array([4.0, 0, 0])
    toward = (p_t - p_d) / np.linalg.norm(p_t - p_d)
    free = pfc_command(p_d, p_t, [], gains)
    blocked = pfc_command(p_d, p_t, [Obstacle(position=(2.0, 0.0, 0.0))], gains)
    assert np.dot(blocked, toward) < np.dot(free, toward)


def test_mirrored_obstacles_cancel_laterally():
    p_d = np.zeros(3)
    p_t = np.array([4.0, 0, 0])
    obstacles = [
        Obstacle(position=(2.0, 0.8, 0.0)),
        Obstacle(position=(2.0, -0.8, 0.0)),
    ]
    out = pfc_command(p_d, p_t, obstacles, GAINS)
    assert abs(out[1]) < 1e-12
    assert abs(out[2]) < 1e-12


def test_kinematic_convergence_is_exponential():
    # integrate p' = command directly; closed form |p(t)| = |p0| e^{-k t}
    gains = PfcGains(v_cmd_max=50.0)
    dt, t_end = 0.001, 3.0
    p = np.array([0.4, -0.3, 0.2])
    p0 = np.linalg.norm(p)
    for k in range(int(t_end / dt)):
        p = p + dt * pfc_command(p, np.zeros(3), [], gains)
    expected = p0 * np.exp(-gains.k_att_p * t_end)
    assert np.linalg.norm(p) == pytest.approx(expected, rel=0.01)


def test_scale_property():
    p_d = np.array([0.2, -0.1, 0.05])
    p_t = np.array([-0.3, 0.2, 0.0])
    base = pfc_command(p_d, p_t, [], PfcGains(k_att_p=0.5))
    doubled = pfc_command(p_d, p_t, [], PfcGains(k_att_p=1.0))
    assert np.array_equal(doubled, 2.0 * base)


@given(vectors)
def test_clamp_speed_bounds_norm(v):
    out = clamp_speed(np.array(v, dtype=float), 1.0)
    assert np.linalg.norm(out) <= 1.0 + 1e-12


def test_gains_validation():
    with pytest.raises(ValueError):
        PfcGains(k_att_p=0.0).validate()
    with pytest.raises(ValueError):
        PfcGains(influence_radius=-1.0).validate()
    PfcGains().validate()


def test_obstacle_validation():
    with pytest.raises(ValueError):
        Obstacle(position=(0, 0, 0), radius=-0.1)
    with pytest.raises(ValueError):
        Obstacle(position=(float("nan"), 0, 0))
    obs = Obstacle(position=(1.0, 0.0, 0.0), velocity=(0.5, 0.0, 0.0))
    assert np.allclose(obs.position_at(2.0), [2.0, 0.0, 0.0])

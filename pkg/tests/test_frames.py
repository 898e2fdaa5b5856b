import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadfield.frames import (
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

angles = st.floats(-10.0, 10.0, allow_nan=False)


def test_rot_yaw_identity():
    assert np.allclose(rot_yaw(0.0), np.eye(3), atol=0)


def test_rot_yaw_quarter_turn():
    assert np.allclose(rot_yaw(math.pi / 2) @ vec3(1, 0, 0), vec3(0, 1, 0), atol=1e-15)


def test_rot_yaw_orthonormal():
    r = rot_yaw(0.3)
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12


def test_rot_roll_identity():
    assert np.allclose(rot_roll(0.0), np.eye(3), atol=0)


def test_rot_roll_half_turn():
    assert np.allclose(rot_roll(math.pi) @ vec3(0, 1, 0), vec3(0, -1, 0), atol=1e-15)


def test_rot_roll_inverse_is_transpose():
    assert np.allclose(rot_roll(-0.2), rot_roll(0.2).T, atol=1e-15)


def test_rot_pitch_identity():
    assert np.allclose(rot_pitch(0.0), np.eye(3), atol=0)


def test_rot_pitch_quarter_turn():
    assert np.allclose(rot_pitch(math.pi / 2) @ vec3(0, 0, 1), vec3(1, 0, 0), atol=1e-15)


@given(angles)
def test_rot_pitch_determinant(theta):
    assert abs(np.linalg.det(rot_pitch(theta)) - 1.0) < 1e-12


def test_rot_full_identity():
    assert np.allclose(rot_full(Attitude()), np.eye(3), atol=0)


@given(angles, st.floats(-1.4, 1.4, allow_nan=False), angles)
def test_rot_full_is_factor_product(roll, pitch, yaw):
    att = Attitude(roll, pitch, yaw)
    product = rot_yaw(yaw) @ rot_pitch(pitch) @ rot_roll(roll)
    assert np.abs(rot_full(att) - product).max() < 1e-12


@given(angles, st.floats(-1.4, 1.4, allow_nan=False), angles)
def test_rot_full_orthonormal(roll, pitch, yaw):
    r = rot_full(Attitude(roll, pitch, yaw))
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_rot_full_gimbal_lock():
    with pytest.raises(GimbalLockError):
        rot_full(Attitude(0.0, math.pi / 2, 0.0))
    with pytest.raises(GimbalLockError):
        rot_full(Attitude(0.1, -math.pi / 2 + 1e-9, 0.2))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        rot_yaw(float("nan"))
    with pytest.raises(ValueError):
        rot_pitch(float("inf"))
    with pytest.raises(ValueError):
        Attitude(0.0, float("nan"), 0.0)


def test_body_to_earth_identity_attitude():
    v = vec3(0.3, -0.7, 2.0)
    assert np.array_equal(body_to_earth(v, Attitude()), v)


def test_yaw_only_transform():
    out = body_to_earth(vec3(1, 0, 0), Attitude(yaw=math.pi / 2))
    assert np.allclose(out, vec3(0, 1, 0), atol=1e-15)


@given(
    st.tuples(angles, st.floats(-1.4, 1.4, allow_nan=False), angles),
    st.tuples(*[st.floats(-50, 50, allow_nan=False)] * 3),
)
def test_frame_round_trip(att_tuple, v_tuple):
    att = Attitude(*att_tuple)
    v = vec3(*v_tuple)
    back = earth_to_body(body_to_earth(v, att), att)
    assert np.abs(back - v).max() < 1e-10


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.0) == 0.0
    assert -math.pi < wrap_angle(123.456) <= math.pi


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_wrap_angle_idempotent(a):
    once = wrap_angle(a)
    assert -math.pi < once <= math.pi
    assert wrap_angle(once) == once


@given(st.tuples(angles, angles, angles))
def test_attitude_normalized_idempotent(tup):
    att = Attitude(*tup).normalized()
    assert att.normalized() == att

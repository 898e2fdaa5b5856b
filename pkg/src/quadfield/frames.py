"""Reference frames and Euler-angle rotations.

Conventions used throughout the package (documented once, here):

* Earth frame E: right-handed inertial frame fixed on the ground.
  x points north, y east, z **down** (toward the earth's center).
* Body frame B: origin at the vehicle's center of mass, x forward,
  y right, z down through the belly.
* Attitude is the Z-Y-X Euler triple: yaw about z, pitch about y,
  roll about x, radians, normalized to (-pi, pi].
* A rotation matrix produced here maps body-frame vectors into the
  earth frame; the transpose maps earth to body.
* Positive motor thrust acts along -z_B, so hovering force opposes the
  +z weight term.

The Euler parameterization loses a degree of freedom when cos(pitch)
is zero.  Operations that need the full rotation raise
:class:`GimbalLockError` near that configuration instead of returning
a rank-deficient transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64

# |cos(pitch)| below this trips the gimbal-lock guard.
COS_PITCH_GUARD = 1e-6

ORTHONORMAL_TOL = 1e-12


class GimbalLockError(ValueError):
    """Rotation requested too close to |pitch| = pi/2."""


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([float(x), float(y), float(z)])


def require_finite(value, name: str = "value") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi].  Idempotent."""
    return -((-angle + math.pi) % math.tau - math.pi)


@dataclass(frozen=True)
class Attitude:
    """Roll, pitch, yaw in radians (Z-Y-X Euler angles)."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Attitude.{name} must be finite")

    def normalized(self) -> "Attitude":
        return Attitude(wrap_angle(self.roll), wrap_angle(self.pitch), wrap_angle(self.yaw))

    def as_array(self) -> Vec3:
        return np.array([self.roll, self.pitch, self.yaw])

    @classmethod
    def from_array(cls, arr) -> "Attitude":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


def rot_yaw(yaw: float) -> np.ndarray:
    """Rotation about the body z axis."""
    if not math.isfinite(yaw):
        raise ValueError("yaw must be finite")
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_roll(roll: float) -> np.ndarray:
    """Rotation about the body x axis."""
    if not math.isfinite(roll):
        raise ValueError("roll must be finite")
    c, s = math.cos(roll), math.sin(roll)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_pitch(pitch: float) -> np.ndarray:
    """Rotation about the body y axis."""
    if not math.isfinite(pitch):
        raise ValueError("pitch must be finite")
    c, s = math.cos(pitch), math.sin(pitch)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_from_angles(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-earth rotation for a Z-Y-X Euler triple.

    Equals rot_yaw(yaw) @ rot_pitch(pitch) @ rot_roll(roll) with the
    entries written out directly.  Raises GimbalLockError when
    |cos(pitch)| < COS_PITCH_GUARD.
    """
    cth = math.cos(pitch)
    if abs(cth) < COS_PITCH_GUARD:
        raise GimbalLockError(
            f"pitch {pitch:.6f} rad is within {COS_PITCH_GUARD} of gimbal lock"
        )
    sph, cph = math.sin(roll), math.cos(roll)
    sth = math.sin(pitch)
    sps, cps = math.sin(yaw), math.cos(yaw)
    return np.array(
        [
            [cps * cth, cps * sph * sth - sps * cph, cps * cph * sth + sps * sph],
            [sps * cth, sps * sph * sth + cps * cph, sps * cph * sth - cps * sph],
            [-sth, sph * cth, cph * cth],
        ]
    )


def rot_full(att: Attitude) -> np.ndarray:
    """Full body-to-earth rotation for an attitude."""
    return rotation_from_angles(att.roll, att.pitch, att.yaw)


def body_to_earth(v: Vec3, att: Attitude) -> Vec3:
    """Express a body-frame vector in the earth frame."""
    v = require_finite(v, "vector")
    return rot_full(att) @ v


def earth_to_body(v: Vec3, att: Attitude) -> Vec3:
    """Express an earth-frame vector in the body frame (uses R^T = R^-1)."""
    v = require_finite(v, "vector")
    return rot_full(att).T @ v

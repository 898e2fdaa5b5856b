"""Position-space potential field control terms.

The command is the negative gradient of artificial potentials over
position: a quadratic bowl centered on the target pulls the drone in,
and an inverse-square barrier around each obstacle pushes it away while
the drone is inside the obstacle's influence radius.

All term functions broadcast over leading axes, so a batch of drone
positions of shape (N, 3) evaluates in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PfcGains:
    """Controller scale factors, cutoffs, and clamps.

    Defaults are tuned for the first-order lag plant so the waypoint
    courses complete and the traditional/extended comparison shows the
    expected contrast; they are echoed into every run report.
    """

    k_att_p: float = 1.0            # 1/s, position attraction
    k_rep_p: float = 0.6            # m^4/s, position repulsion strength
    influence_radius: float = 4.0   # m, obstacle repulsion cutoff
    k_att_v: float = 1.0            # velocity attraction (relative-velocity damping)
    k_rep_v: float = 0.2            # velocity repulsion strength (moving obstacles)
    k_closing: float = 2.5          # closing-rate repulsion scale
    eps_dist: float = 1e-3          # m, lower clamp on distance denominators
    eps_vel: float = 1e-3           # m/s, stationary/degenerate velocity threshold
    v_cmd_max: float = 1.0          # m/s, command saturation
    skip_repulsion_when_receding: bool = True  # extended controller only

    def validate(self) -> None:
        for name in ("k_att_p", "k_rep_p", "influence_radius", "k_att_v",
                      "k_rep_v", "k_closing", "eps_dist", "eps_vel", "v_cmd_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PfcGains.{name} must be > 0")

    def to_dict(self) -> dict:
        return {
            "k_att_p": self.k_att_p, "k_rep_p": self.k_rep_p,
            "influence_radius": self.influence_radius,
            "k_att_v": self.k_att_v, "k_rep_v": self.k_rep_v,
            "k_closing": self.k_closing, "eps_dist": self.eps_dist,
            "eps_vel": self.eps_vel, "v_cmd_max": self.v_cmd_max,
            "skip_repulsion_when_receding": self.skip_repulsion_when_receding,
        }


@dataclass(frozen=True)
class Obstacle:
    """A (possibly drifting) spherical obstacle.

    The radius only enters collision/clearance metrics; the potential
    field acts on the center point.
    """

    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.25

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("Obstacle.radius must be >= 0")
        arr = np.array(self.position + self.velocity, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("Obstacle fields must be finite")

    def position_at(self, t: float) -> np.ndarray:
        return np.array(self.position) + np.array(self.velocity) * t


def stack_obstacles(obstacles: Sequence[Obstacle]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack obstacle centers, velocities and radii into (n, 3)/(n,) arrays."""
    if not obstacles:
        return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)
    p = np.array([o.position for o in obstacles], dtype=float)
    v = np.array([o.velocity for o in obstacles], dtype=float)
    r = np.array([o.radius for o in obstacles], dtype=float)
    return p, v, r


def attractive_velocity(p_d, p_t, k_att_p: float) -> np.ndarray:
    """Velocity command pulling the drone from p_d toward the target p_t."""
    p_d = np.asarray(p_d, dtype=float)
    p_t = np.asarray(p_t, dtype=float)
    return -k_att_p * (p_d - p_t)


def repulsive_velocity(
    p_d, p_o, k_rep_p: float, influence_radius: float, eps_dist: float = 1e-3
) -> np.ndarray:
    """Velocity command pushing the drone away from an obstacle center.

    Inverse-cubic in distance, exactly zero outside the influence
    radius, and finite everywhere (the distance denominator is clamped
    below by eps_dist, so a coincident drone/obstacle yields zero).
    """
    p_d = np.asarray(p_d, dtype=float)
    p_o = np.asarray(p_o, dtype=float)
    p_do = p_d - p_o
    dist = np.linalg.norm(p_do, axis=-1, keepdims=True)
    denom = np.maximum(dist, eps_dist) ** 4
    raw = k_rep_p * p_do / denom
    return np.where(dist <= influence_radius, raw, 0.0)


def clamp_speed(cmd: np.ndarray, v_max: float) -> np.ndarray:
    """Scale the command down to norm v_max when it exceeds it."""
    norm = np.linalg.norm(cmd, axis=-1, keepdims=True)
    scale = np.where(norm > v_max, v_max / np.maximum(norm, 1e-300), 1.0)
    return cmd * scale


def position_repulsion(
    p_d, p_obs, gains: PfcGains, v_d=None, v_obs=None, gate_on_recede: bool = False
):
    """Summed position repulsion over stacked obstacles, plus activity mask.

    p_obs/v_obs have shape (n, 3); p_d may carry leading batch axes.
    With gate_on_recede the term is active only while the drone is
    closing on the obstacle.
    """
    p_do = np.asarray(p_d, dtype=float)[..., None, :] - p_obs
    dist = np.linalg.norm(p_do, axis=-1, keepdims=True)
    in_range = dist <= gains.influence_radius
    if gate_on_recede:
        v_do = np.asarray(v_d, dtype=float)[..., None, :] - v_obs
        rdot = np.sum(p_do * v_do, axis=-1, keepdims=True) / np.maximum(
            dist, gains.eps_dist
        )
        in_range = in_range & (rdot < 0.0)
    raw = gains.k_rep_p * p_do / np.maximum(dist, gains.eps_dist) ** 4
    per_obs = np.where(in_range, raw, 0.0)
    return np.sum(per_obs, axis=-2), np.any(in_range, axis=(-2, -1))


def pfc_command(
    p_d, p_t, obstacles: Sequence[Obstacle], gains: PfcGains
) -> np.ndarray:
    """Traditional potential field command: attraction plus in-range repulsion.

    The summed command is saturated to gains.v_cmd_max.
    """
    p_obs, _, _ = stack_obstacles(obstacles)
    att = attractive_velocity(p_d, p_t, gains.k_att_p)
    rep, _ = position_repulsion(p_d, p_obs, gains)
    return clamp_speed(att + rep, gains.v_cmd_max)

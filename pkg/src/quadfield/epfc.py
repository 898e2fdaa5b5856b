"""Extended potential field controller.

Extends the position-space controller with three velocity-aware terms:

* velocity attraction — match the target's velocity, which damps the
  approach instead of letting the drone sail through the goal;
* velocity repulsion — avoid matching a *moving* obstacle's velocity
  (inactive for stationary obstacles);
* closing-rate repulsion — push directly away from an obstacle only
  while the drone-obstacle distance is shrinking, so an obstacle
  already behind the drone exerts no influence.

Each term carries its own activation gate; the saturation clamp is
applied once, to the summed command, so the additive decomposition of
the terms is preserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .pfc import (
    Obstacle,
    PfcGains,
    attractive_velocity,
    clamp_speed,
    position_repulsion,
    stack_obstacles,
)


def velocity_attractive(v_d, v_t, k_att_v: float) -> np.ndarray:
    """Command component driving the drone's velocity toward the target's."""
    v_d = np.asarray(v_d, dtype=float)
    v_t = np.asarray(v_t, dtype=float)
    return -k_att_v * (v_d - v_t)


def velocity_repulsive(v_d, v_o, k_rep_v: float, eps_vel: float = 1e-3) -> np.ndarray:
    """Repulsion in velocity space from a moving obstacle.

    Zero for stationary obstacles (|v_o| below eps_vel) and zero in the
    degenerate matched-velocity case, where the inverse-quartic would
    otherwise blow up without conveying any approach information.
    """
    v_d = np.asarray(v_d, dtype=float)
    v_o = np.asarray(v_o, dtype=float)
    v_do = v_d - v_o
    obs_speed = np.linalg.norm(v_o, axis=-1, keepdims=True)
    rel_speed = np.linalg.norm(v_do, axis=-1, keepdims=True)
    raw = k_rep_v * v_do / np.maximum(rel_speed, eps_vel) ** 4
    active = (obs_speed >= eps_vel) & (rel_speed >= eps_vel)
    return np.where(active, raw, 0.0)


def closing_rate(p_d, p_o, v_d, v_o, eps_dist: float = 1e-3) -> np.ndarray:
    """Time derivative of the drone-obstacle distance; negative means closing."""
    p_do = np.asarray(p_d, dtype=float) - np.asarray(p_o, dtype=float)
    v_do = np.asarray(v_d, dtype=float) - np.asarray(v_o, dtype=float)
    dist = np.linalg.norm(p_do, axis=-1)
    return np.sum(p_do * v_do, axis=-1) / np.maximum(dist, eps_dist)


def closing_repulsive(
    p_d, p_o, v_d, v_o, k_closing: float, eps_dist: float = 1e-3
) -> np.ndarray:
    """Evasive push along the drone-obstacle line while closing.

    Proportional to the closing speed, directed away from the obstacle;
    exactly zero when the distance is constant or growing.
    """
    p_do = np.asarray(p_d, dtype=float) - np.asarray(p_o, dtype=float)
    rdot = closing_rate(p_d, p_o, v_d, v_o, eps_dist)[..., None]
    dist = np.linalg.norm(p_do, axis=-1, keepdims=True)
    raw = -k_closing * rdot * p_do / np.maximum(dist, eps_dist)
    return np.where(rdot < 0.0, raw, 0.0)


def to_body_frame(v_cmd_earth, yaw: float) -> np.ndarray:
    """Rotate an earth-frame command into the body frame through yaw only."""
    v = np.asarray(v_cmd_earth, dtype=float)
    c, s = math.cos(yaw), math.sin(yaw)
    return np.stack(
        [c * v[..., 0] + s * v[..., 1],
         -s * v[..., 0] + c * v[..., 1],
         v[..., 2]],
        axis=-1,
    )


def yaw_to_face_target(p_d, p_t, eps_dist: float = 1e-3) -> Optional[float]:
    """Heading that points the nose at the target, in (-pi, pi].

    Returns None for degenerate overhead geometry (no horizontal
    separation), in which case the caller should hold its heading.
    """
    rel = np.asarray(p_t, dtype=float) - np.asarray(p_d, dtype=float)
    if math.hypot(rel[0], rel[1]) <= eps_dist:
        return None
    return math.atan2(rel[1], rel[0])


@dataclass(frozen=True)
class ControlBreakdown:
    """Per-term decomposition of one controller evaluation.

    total_unsaturated is computed literally as pfc_part + extension so
    the additive identity holds bitwise.
    """

    att_p: np.ndarray
    rep_p: np.ndarray
    att_v: np.ndarray
    rep_v: np.ndarray
    close: np.ndarray
    pfc_part: np.ndarray
    extension: np.ndarray
    total_unsaturated: np.ndarray
    command: np.ndarray
    pos_rep_active: np.ndarray
    vel_rep_active: np.ndarray
    close_active: np.ndarray
    saturated: np.ndarray


def pfc_breakdown(
    p_d, v_d, p_t, v_t, p_obs: np.ndarray, v_obs: np.ndarray, gains: PfcGains
) -> ControlBreakdown:
    """Traditional controller evaluation with per-term logging fields.

    Velocity terms are identically zero; the signature mirrors the
    extended breakdown so the simulation loop can treat both alike.
    """
    att_p = attractive_velocity(p_d, p_t, gains.k_att_p)
    rep_p, pos_active = position_repulsion(p_d, p_obs, gains)
    zero = np.zeros_like(att_p)
    pfc_part = att_p + rep_p
    extension = zero
    total = pfc_part + extension
    command = clamp_speed(total, gains.v_cmd_max)
    norm = np.linalg.norm(total, axis=-1)
    return ControlBreakdown(
        att_p=att_p, rep_p=rep_p, att_v=zero, rep_v=zero, close=zero,
        pfc_part=pfc_part, extension=extension, total_unsaturated=total,
        command=command, pos_rep_active=pos_active,
        vel_rep_active=np.zeros_like(pos_active),
        close_active=np.zeros_like(pos_active),
        saturated=norm > gains.v_cmd_max,
    )


def epfc_breakdown(
    p_d, v_d, p_t, v_t, p_obs: np.ndarray, v_obs: np.ndarray, gains: PfcGains
) -> ControlBreakdown:
    """Extended controller evaluation with per-term logging fields."""
    att_p = attractive_velocity(p_d, p_t, gains.k_att_p)
    rep_p, pos_active = position_repulsion(
        p_d, p_obs, gains, v_d=v_d, v_obs=v_obs,
        gate_on_recede=gains.skip_repulsion_when_receding,
    )
    att_v = velocity_attractive(v_d, v_t, gains.k_att_v)

    p_do = np.asarray(p_d, dtype=float)[..., None, :] - p_obs
    v_do = np.asarray(v_d, dtype=float)[..., None, :] - v_obs
    dist = np.linalg.norm(p_do, axis=-1, keepdims=True)
    obs_speed = np.linalg.norm(v_obs, axis=-1, keepdims=True)
    rel_speed = np.linalg.norm(v_do, axis=-1, keepdims=True)

    vel_active = (obs_speed >= gains.eps_vel) & (rel_speed >= gains.eps_vel)
    rep_v_raw = gains.k_rep_v * v_do / np.maximum(rel_speed, gains.eps_vel) ** 4
    rep_v = np.sum(np.where(vel_active, rep_v_raw, 0.0), axis=-2)

    rdot = np.sum(p_do * v_do, axis=-1, keepdims=True) / np.maximum(dist, gains.eps_dist)
    close_gate = (rdot < 0.0) & (dist <= gains.influence_radius)
    close_raw = -gains.k_closing * rdot * p_do / np.maximum(dist, gains.eps_dist)
    close = np.sum(np.where(close_gate, close_raw, 0.0), axis=-2)

    pfc_part = att_p + rep_p
    extension = att_v + rep_v + close
    total = pfc_part + extension
    command = clamp_speed(total, gains.v_cmd_max)
    norm = np.linalg.norm(total, axis=-1)
    return ControlBreakdown(
        att_p=att_p, rep_p=rep_p, att_v=att_v, rep_v=rep_v, close=close,
        pfc_part=pfc_part, extension=extension, total_unsaturated=total,
        command=command, pos_rep_active=pos_active,
        vel_rep_active=np.any(vel_active, axis=(-2, -1)),
        close_active=np.any(close_gate, axis=(-2, -1)),
        saturated=norm > gains.v_cmd_max,
    )


def epfc_command(
    p_d, v_d, p_t, v_t, obstacles: Sequence[Obstacle], gains: PfcGains
) -> np.ndarray:
    """Full extended potential field command, saturated to gains.v_cmd_max."""
    p_obs, v_obs, _ = stack_obstacles(obstacles)
    return epfc_breakdown(p_d, v_d, p_t, v_t, p_obs, v_obs, gains).command

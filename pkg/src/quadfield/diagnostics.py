"""Numerical stability monitor over completed trajectories.

The monitored quantity is the artificial potential of the controller,

    L = 1/2 * k_att_p * |p_rel|^2 + 1/2 * k_att_v * |v_rel|^2,

evaluated against the logged target-relative state at every step.  The
controller's convergence argument only covers the obstacle-free
attractive field, so steps with any repulsive term active (and steps
where the target teleports between waypoints) are excluded from the
verdict and reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pfc import PfcGains

# Gate/event bits shared with the trajectory log (see scenario module).
_REPULSION_BITS = 0b111   # position, velocity, closing repulsion
_ADVANCE_BIT = 0b1000


def lyapunov_value(p_rel, v_rel, k_att_p: float, k_att_v: float) -> np.ndarray:
    """Artificial-potential value for target-relative position/velocity."""
    p_rel = np.asarray(p_rel, dtype=float)
    v_rel = np.asarray(v_rel, dtype=float)
    return 0.5 * k_att_p * np.sum(p_rel * p_rel, axis=-1) \
        + 0.5 * k_att_v * np.sum(v_rel * v_rel, axis=-1)


@dataclass
class LyapunovReport:
    """Outcome of monitoring one trajectory."""

    passed: bool
    n_steps: int
    n_checked: int
    n_excluded: int
    n_increases: int
    max_increase: float
    tolerance: float
    excluded_intervals: list = field(default_factory=list)
    values: np.ndarray = field(default=None, repr=False)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "n_steps": self.n_steps,
            "n_checked": self.n_checked,
            "n_excluded": self.n_excluded,
            "n_increases": self.n_increases,
            "max_increase": self.max_increase,
            "tolerance": self.tolerance,
            "excluded_intervals": [[int(a), int(b)] for a, b in self.excluded_intervals],
        }


def _intervals(mask: np.ndarray) -> list:
    """Contiguous True runs of mask as [start, end] index pairs (inclusive)."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return [(int(a), int(b)) for a, b in zip(starts, ends)]


def monitor(log, gains: PfcGains, tol: float = 1e-9) -> LyapunovReport:
    """Check that the artificial potential never increases along a log.

    A step k passes when L[k] - L[k-1] <= tol * max(1, L[k-1]).
    Excluded from the verdict: steps with any repulsive gate open at
    either endpoint, and re-alignment transients.  A transient starts
    where the tracking premise breaks (the initial at-rest record, a
    waypoint teleport, a target-velocity discontinuity at a path
    corner) and lasts while L keeps rising; once L falls again the
    verdict is enforced step by step.
    """
    n = len(log.t)
    if n == 0:
        raise ValueError("cannot monitor an empty trajectory log")
    p_rel = log.p - log.target_p
    v_rel = log.v - log.target_v
    values = lyapunov_value(p_rel, v_rel, gains.k_att_p, gains.k_att_v)
    if n == 1:
        return LyapunovReport(
            passed=True, n_steps=0, n_checked=0, n_excluded=0,
            n_increases=0, max_increase=0.0, tolerance=tol,
            excluded_intervals=[], values=values,
        )
    gate_open = (log.gates & _REPULSION_BITS) != 0
    advanced = (log.gates & _ADVANCE_BIT) != 0
    target_jump = np.zeros(n, dtype=bool)
    target_jump[1:] = np.linalg.norm(np.diff(log.target_v, axis=0), axis=1) > 1e-12
    # step k spans records k-1 -> k
    excluded = gate_open[1:] | gate_open[:-1] | advanced[1:] | target_jump[1:]
    delta = np.diff(values)
    for start in [0, *np.flatnonzero(advanced[1:] | target_jump[1:])]:
        j = start
        while j < n - 1 and (excluded[j] or delta[j] > 0.0):
            excluded[j] = True
            j += 1
    allowed = tol * np.maximum(1.0, values[:-1])
    violation = (delta > allowed) & ~excluded
    increases = (delta > 0.0) & ~excluded
    max_inc = float(np.max(delta[~excluded])) if np.any(~excluded) else 0.0
    return LyapunovReport(
        passed=not bool(np.any(violation)),
        n_steps=n - 1,
        n_checked=int(np.sum(~excluded)),
        n_excluded=int(np.sum(excluded)),
        n_increases=int(np.sum(increases)),
        max_increase=max_inc,
        tolerance=tol,
        excluded_intervals=_intervals(excluded),
        values=values,
    )

"""Post-run evaluation: overshoot, settling time, clearance, comparisons.

Legs are derived from the waypoint-advance events recorded in the log
(never re-detected from the trajectory).  Overshoot and settling are
measured along the dominant axis of each leg's step, the classic
worst-case-axis treatment of a 2D waypoint change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagnostics import LyapunovReport, monitor
from .pfc import Obstacle, PfcGains
from .scenario import Scenario, TrajectoryLog, WaypointCourse

DEFAULT_SETTLE_BAND_PCT = 5.0


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Leg:
    """One waypoint transition: records [start_index, end_index] inclusive."""

    start_index: int
    end_index: int
    wp_index: int
    origin: tuple[float, float, float]
    target: tuple[float, float, float]

    @property
    def axis(self) -> int:
        delta = np.array(self.target) - np.array(self.origin)
        return int(np.argmax(np.abs(delta)))

    @property
    def magnitude(self) -> float:
        delta = np.array(self.target) - np.array(self.origin)
        return float(abs(delta[self.axis]))


def legs_from_log(log: TrajectoryLog) -> list[Leg]:
    """Split a log into legs at the recorded waypoint-advance events.

    Static-target runs yield one leg covering the whole log; parametric
    paths yield none (no step inputs to measure).
    """
    n = len(log)
    if n == 0:
        return []
    if log.target_kind == "ParametricPath":
        return []
    wp = log.wp_index
    starts = [0] + [i for i in range(1, n) if wp[i] != wp[i - 1]]
    legs = []
    for j, s in enumerate(starts):
        e = (starts[j + 1] - 1) if j + 1 < len(starts) else n - 1
        legs.append(
            Leg(
                start_index=s,
                end_index=e,
                wp_index=int(wp[s]),
                origin=tuple(log.p[s]),
                target=tuple(log.target_p[s]),
            )
        )
    return legs


def overshoot(log: TrajectoryLog, leg: Leg) -> Optional[float]:
    """Percent excursion past the leg's target along its dominant axis.

    None for zero-magnitude steps, where the ratio is undefined.
    """
    mag = leg.magnitude
    if mag <= 0.0:
        return None
    ax = leg.axis
    direction = math.copysign(1.0, leg.target[ax] - leg.origin[ax])
    track = log.p[leg.start_index : leg.end_index + 1, ax]
    past = (track - leg.target[ax]) * direction
    return float(max(np.max(past), 0.0) / mag * 100.0)


def settling_time(
    log: TrajectoryLog, leg: Leg, band_pct: float = DEFAULT_SETTLE_BAND_PCT
) -> Optional[float]:
    """Time from leg start until the axis error stays within the band.

    The band is band_pct percent of the step magnitude.  Returns None
    when the error is still outside the band at the leg's last record.
    """
    mag = leg.magnitude
    if mag <= 0.0:
        return None
    ax = leg.axis
    band = band_pct / 100.0 * mag
    err = np.abs(log.p[leg.start_index : leg.end_index + 1, ax] - leg.target[ax])
    outside = np.flatnonzero(err > band)
    if outside.size == 0:
        return 0.0
    first_settled = outside[-1] + 1
    if first_settled >= len(err):
        return None
    return float(log.t[leg.start_index + first_settled] - log.t[leg.start_index])


def _clearance_series(log: TrajectoryLog, obstacles: Sequence[Obstacle]) -> np.ndarray:
    """Per-record, per-obstacle distance-to-surface matrix, shape (n, n_obs)."""
    p_obs = np.array([o.position for o in obstacles], dtype=float)
    v_obs = np.array([o.velocity for o in obstacles], dtype=float)
    radii = np.array([o.radius for o in obstacles], dtype=float)
    centers = p_obs[None, :, :] + v_obs[None, :, :] * log.t[:, None, None]
    dist = np.linalg.norm(log.p[:, None, :] - centers, axis=-1)
    return dist - radii[None, :]


def min_clearance(log: TrajectoryLog, obstacles: Sequence[Obstacle]) -> float:
    """Smallest distance to any obstacle surface; +inf with no obstacles."""
    if not obstacles:
        return math.inf
    return float(np.min(_clearance_series(log, obstacles)))


def collisions(log: TrajectoryLog, obstacles: Sequence[Obstacle]) -> int:
    """Number of obstacle-surface penetrations, contiguous runs counted once."""
    if not obstacles:
        return 0
    inside = _clearance_series(log, obstacles) <= 0.0
    count = 0
    for col in inside.T:
        padded = np.concatenate([[False], col])
        count += int(np.sum(padded[1:] & ~padded[:-1]))
    return count


@dataclass(frozen=True)
class LegMetrics:
    wp_index: int
    axis: int
    magnitude: float
    overshoot_pct: Optional[float]
    settling_s: Optional[float]

    def to_dict(self) -> dict:
        return {
            "wp_index": self.wp_index, "axis": self.axis,
            "magnitude": self.magnitude, "overshoot_pct": self.overshoot_pct,
            "settling_s": self.settling_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LegMetrics":
        return cls(**d)


@dataclass(frozen=True)
class RunMetrics:
    """Evaluation summary of one run, comparable across controllers."""

    scenario: str
    controller: str
    plant: str
    legs: tuple[LegMetrics, ...]
    worst_overshoot_pct: Optional[float]
    worst_settling_s: Optional[float]
    all_settled: bool
    lap_time_s: Optional[float]
    min_clearance_m: Optional[float]
    collisions: int
    max_speed_ms: float
    lyapunov_verdict: str

    @property
    def settling_for_comparison(self) -> float:
        """Worst settling time with unsettled legs counted as +inf."""
        if not self.all_settled or self.worst_settling_s is None:
            return math.inf
        return self.worst_settling_s

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "controller": self.controller,
            "plant": self.plant, "legs": [leg.to_dict() for leg in self.legs],
            "worst_overshoot_pct": self.worst_overshoot_pct,
            "worst_settling_s": self.worst_settling_s,
            "all_settled": self.all_settled,
            "lap_time_s": self.lap_time_s,
            "min_clearance_m": self.min_clearance_m,
            "collisions": self.collisions,
            "max_speed_ms": self.max_speed_ms,
            "lyapunov_verdict": self.lyapunov_verdict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        d = dict(d)
        d["legs"] = tuple(LegMetrics.from_dict(x) for x in d["legs"])
        return cls(**d)


def compute_run_metrics(
    log: TrajectoryLog,
    scenario: Scenario,
    band_pct: float = DEFAULT_SETTLE_BAND_PCT,
    lyapunov: Optional[LyapunovReport] = None,
) -> RunMetrics:
    """Evaluate a completed run against its scenario."""
    legs = legs_from_log(log)
    leg_metrics = []
    for leg in legs:
        leg_metrics.append(
            LegMetrics(
                wp_index=leg.wp_index,
                axis=leg.axis,
                magnitude=leg.magnitude,
                overshoot_pct=overshoot(log, leg),
                settling_s=settling_time(log, leg, band_pct),
            )
        )
    overshoots = [m.overshoot_pct for m in leg_metrics if m.overshoot_pct is not None]
    settlings = [m.settling_s for m in leg_metrics if m.settling_s is not None]
    measurable = [m for m in leg_metrics if m.magnitude > 0.0]
    all_settled = bool(measurable) and all(
        m.settling_s is not None for m in measurable
    )
    lap_time = None
    if isinstance(scenario.target, WaypointCourse):
        last = len(scenario.target.waypoints) - 1
        if last in log.arrival_times:
            lap_time = float(log.arrival_times[last])
    clearance = min_clearance(log, scenario.obstacles)
    report = lyapunov if lyapunov is not None else monitor(log, scenario.gains)
    return RunMetrics(
        scenario=scenario.name,
        controller=scenario.controller,
        plant=scenario.plant,
        legs=tuple(leg_metrics),
        worst_overshoot_pct=max(overshoots) if overshoots else None,
        worst_settling_s=max(settlings) if settlings else None,
        all_settled=all_settled,
        lap_time_s=lap_time,
        min_clearance_m=None if math.isinf(clearance) else clearance,
        collisions=collisions(log, scenario.obstacles),
        max_speed_ms=float(np.max(np.linalg.norm(log.v, axis=1))) if len(log) else 0.0,
        lyapunov_verdict=report.verdict,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Side-by-side metrics for several controllers on one scenario."""

    scenario: str
    plant: str
    entries: tuple[RunMetrics, ...]
    trends: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "plant": self.plant,
            "entries": [e.to_dict() for e in self.entries],
            "trends": dict(self.trends),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        return cls(
            scenario=d["scenario"],
            plant=d["plant"],
            entries=tuple(RunMetrics.from_dict(e) for e in d["entries"]),
            trends=dict(d["trends"]),
        )

    def render_text(self) -> str:
        def fmt(x, unit=""):
            if x is None:
                return "absent"
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return f"{x:.3g}{unit}"

        lines = [
            f"scenario: {self.scenario} (plant: {self.plant})",
            f"{'controller':<12}{'overshoot':<12}{'settling':<12}"
            f"{'lap':<10}{'clearance':<12}{'collisions':<12}{'lyapunov':<10}",
        ]
        for e in self.entries:
            lines.append(
                f"{e.controller:<12}"
                f"{fmt(e.worst_overshoot_pct, '%'):<12}"
                f"{fmt(e.settling_for_comparison, 's'):<12}"
                f"{fmt(e.lap_time_s, 's'):<10}"
                f"{fmt(e.min_clearance_m, 'm'):<12}"
                f"{e.collisions:<12}"
                f"{e.lyapunov_verdict:<10}"
            )
        if self.trends:
            flags = ", ".join(f"{k}={'ok' if v else 'VIOLATED'}"
                              for k, v in self.trends.items())
            lines.append(f"trends: {flags}")
        return "\n".join(lines)


def compare(metrics_list: Sequence[RunMetrics]) -> ComparisonReport:
    """Build a comparison report; all entries must share scenario and plant."""
    if len(metrics_list) < 2:
        raise MetricsError("compare needs at least two runs")
    first = metrics_list[0]
    for m in metrics_list[1:]:
        if m.scenario != first.scenario or m.plant != first.plant:
            raise MetricsError(
                f"scenario mismatch: {m.scenario}/{m.plant} vs "
                f"{first.scenario}/{first.plant}"
            )
    by_controller = {m.controller: m for m in metrics_list}
    trends = {}
    if "pfc" in by_controller and "epfc" in by_controller:
        pfc_m, epfc_m = by_controller["pfc"], by_controller["epfc"]
        pfc_ov = pfc_m.worst_overshoot_pct
        epfc_ov = epfc_m.worst_overshoot_pct
        trends["epfc_overshoot_lt_pfc"] = (
            pfc_ov is not None and epfc_ov is not None and epfc_ov < pfc_ov
        )
        trends["epfc_settling_le_pfc"] = (
            epfc_m.settling_for_comparison <= pfc_m.settling_for_comparison
        )
        if pfc_m.min_clearance_m is not None and epfc_m.min_clearance_m is not None:
            trends["epfc_clearance_gt_pfc"] = (
                epfc_m.min_clearance_m > pfc_m.min_clearance_m
            )
        trends["zero_collisions"] = (
            pfc_m.collisions == 0 and epfc_m.collisions == 0
        )
    return ComparisonReport(
        scenario=first.scenario,
        plant=first.plant,
        entries=tuple(metrics_list),
        trends=trends,
    )

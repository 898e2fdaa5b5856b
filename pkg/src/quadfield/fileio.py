"""Scenario files, trajectory tables, and metrics documents.

This module is the package's external data surface:

* scenario files — YAML with fixed sections (params, gains, plant,
  controller, target, obstacles, sim, flags).  Unknown keys are
  rejected, every physical value is validated on load, and defaults
  filled in are echoed in the loaded scenario's provenance block.
  A file may instead name a ``builtin`` and override parts of it.
* trajectory tables — CSV, one row per step, fixed column order,
  12 significant digits (parse-back accurate to 1e-9).
* metrics documents — JSON with a schema_version field, validated
  against METRICS_SCHEMA before writing.

Writers refuse to emit NaN/Inf tokens; such values indicate an
upstream bug and abort with an error.
"""

from __future__ import annotations

import dataclasses
import json
import re
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from .dynamics import CascadeGains, QuadParams, VelocityPlantConfig
from .metrics import ComparisonReport, RunMetrics
from .pfc import Obstacle, PfcGains
from .scenario import (
    CONTROLLERS,
    PLANTS,
    ParametricPath,
    Scenario,
    StaticPoint,
    TrajectoryLog,
    Waypoint,
    WaypointCourse,
    builtin_scenarios,
)

SCHEMA_VERSION = 1

TRAJECTORY_COLUMNS = (
    "t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw",
    "tx", "ty", "tz", "cmdx", "cmdy", "cmdz",
    "term_att_px", "term_att_py", "term_att_pz",
    "term_rep_px", "term_rep_py", "term_rep_pz",
    "term_att_vx", "term_att_vy", "term_att_vz",
    "term_rep_vx", "term_rep_vy", "term_rep_vz",
    "term_closex", "term_closey", "term_closez",
    "gates", "sat",
)


class ScenarioLoadError(ValueError):
    """Scenario file could not be parsed."""


class ScenarioValidationError(ValueError):
    """Scenario content violates a field constraint."""


class OutputError(RuntimeError):
    """Failed to produce an output artifact."""


# ---------------------------------------------------------------------------
# scenario <-> dict

_SECTION_KEYS = (
    "schema_version", "name", "builtin", "controller", "plant",
    "params", "gains", "target", "obstacles", "sim", "flags",
)


def _check_keys(d: dict, allowed, path: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ScenarioValidationError(
            f"{path or 'document'}: unknown key(s) {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}"
        )


def _build_config(cls, d: dict, path: str, provenance: dict):
    """Instantiate a config dataclass from a dict with strict keys."""
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(d, names, path)
    defaulted = [n for n in names if n not in d]
    if defaulted:
        provenance.setdefault("defaulted", []).extend(f"{path}.{n}" for n in defaulted)
    try:
        obj = cls(**d)
        if hasattr(obj, "validate"):
            obj.validate()
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(_reroot(str(exc), path)) from exc
    return obj


def _reroot(msg: str, path: str) -> str:
    """Replace a leading ClassName. prefix in an error with the file path."""
    return re.sub(r"^\w+\.", f"{path}.", msg)


def _triple(value, path: str) -> tuple[float, float, float]:
    try:
        x, y, z = value
        return (float(x), float(y), float(z))
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(f"{path}: expected [x, y, z], got {value!r}") from exc


def _target_to_dict(target, standoff: float) -> dict:
    if isinstance(target, StaticPoint):
        return {"kind": "static", "point": list(target.point), "standoff": standoff}
    if isinstance(target, WaypointCourse):
        return {
            "kind": "waypoints",
            "waypoints": [
                {"position": list(w.position), "dwell": w.dwell}
                for w in target.waypoints
            ],
            "advance": target.advance,
            "arrival_radius": target.arrival_radius,
            "standoff": standoff,
        }
    if isinstance(target, ParametricPath):
        return {
            "kind": "path",
            "vertices": [list(v) for v in target.vertices],
            "speed": target.speed,
            "closed": target.closed,
            "standoff": standoff,
        }
    raise TypeError(f"unknown target type {type(target).__name__}")


def _target_from_dict(d: dict, provenance: dict):
    kind = d.get("kind")
    if kind == "static":
        _check_keys(d, ("kind", "point", "standoff"), "target")
        if "point" not in d:
            raise ScenarioValidationError("target.point is required for kind=static")
        return StaticPoint(_triple(d["point"], "target.point"))
    if kind == "waypoints":
        _check_keys(
            d, ("kind", "waypoints", "advance", "arrival_radius", "standoff"), "target"
        )
        if not d.get("waypoints"):
            raise ScenarioValidationError("target.waypoints must be a nonempty list")
        wps = []
        for i, w in enumerate(d["waypoints"]):
            _check_keys(w, ("position", "dwell"), f"target.waypoints[{i}]")
            try:
                wps.append(
                    Waypoint(
                        position=_triple(w["position"], f"target.waypoints[{i}].position"),
                        dwell=float(w.get("dwell", 0.0)),
                    )
                )
            except ValueError as exc:
                raise ScenarioValidationError(
                    _reroot(str(exc), f"target.waypoints[{i}]")
                ) from exc
        try:
            return WaypointCourse(
                waypoints=tuple(wps),
                advance=d.get("advance", "on_arrival"),
                arrival_radius=float(d.get("arrival_radius", 0.15)),
            )
        except ValueError as exc:
            raise ScenarioValidationError(_reroot(str(exc), "target")) from exc
    if kind == "path":
        _check_keys(d, ("kind", "vertices", "speed", "closed", "standoff"), "target")
        if "vertices" not in d or "speed" not in d:
            raise ScenarioValidationError("target needs vertices and speed for kind=path")
        try:
            return ParametricPath(
                vertices=tuple(
                    _triple(v, f"target.vertices[{i}]")
                    for i, v in enumerate(d["vertices"])
                ),
                speed=float(d["speed"]),
                closed=bool(d.get("closed", True)),
            )
        except ValueError as exc:
            raise ScenarioValidationError(_reroot(str(exc), "target")) from exc
    raise ScenarioValidationError(
        f"target.kind must be one of static|waypoints|path, got {kind!r}"
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Full, loadable dict form of a scenario (the file format)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "controller": scenario.controller,
        "plant": {
            "kind": scenario.plant,
            "lag": scenario.lag.to_dict(),
            "cascade": scenario.cascade.to_dict(),
        },
        "params": scenario.quad.to_dict(),
        "gains": scenario.gains.to_dict(),
        "target": _target_to_dict(scenario.target, scenario.standoff),
        "obstacles": [
            {
                "position": list(o.position),
                "velocity": list(o.velocity),
                "radius": o.radius,
            }
            for o in scenario.obstacles
        ],
        "sim": {
            "dt": scenario.dt,
            "t_end": scenario.t_end,
            "seed": scenario.seed,
            "start": list(scenario.start),
            "z_setpoint": scenario.z_setpoint,
        },
        "flags": {"face_target": scenario.face_target},
    }


def scenario_from_dict(doc: dict, name_fallback: str = "scenario") -> Scenario:
    """Build and validate a Scenario from its dict form.

    Defaults filled in are recorded in the result's provenance block.
    """
    if not isinstance(doc, dict):
        raise ScenarioValidationError("scenario document must be a mapping")
    _check_keys(doc, _SECTION_KEYS, "")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioValidationError(
            f"schema_version {version!r} unsupported (expected {SCHEMA_VERSION})"
        )
    provenance: dict = {}

    gains = _build_config(PfcGains, dict(doc.get("gains", {})), "gains", provenance)
    quad = _build_config(QuadParams, dict(doc.get("params", {})), "params", provenance)

    plant_sec = dict(doc.get("plant", {}))
    _check_keys(plant_sec, ("kind", "lag", "cascade"), "plant")
    plant_kind = plant_sec.get("kind", "lag")
    if plant_kind not in PLANTS:
        raise ScenarioValidationError(
            f"plant.kind must be one of {'|'.join(PLANTS)}, got {plant_kind!r}"
        )
    lag = _build_config(
        VelocityPlantConfig, dict(plant_sec.get("lag", {})), "plant.lag", provenance
    )
    cascade = _build_config(
        CascadeGains, dict(plant_sec.get("cascade", {})), "plant.cascade", provenance
    )

    controller = doc.get("controller", "epfc")
    if controller not in CONTROLLERS:
        raise ScenarioValidationError(
            f"controller must be one of {'|'.join(CONTROLLERS)}, got {controller!r}"
        )

    if "target" not in doc:
        raise ScenarioValidationError("target section is required")
    target_sec = dict(doc["target"])
    standoff = float(target_sec.get("standoff", 0.0))
    if standoff < 0:
        raise ScenarioValidationError("target.standoff must be >= 0")
    target = _target_from_dict(target_sec, provenance)

    obstacles = []
    for i, od in enumerate(doc.get("obstacles", []) or []):
        _check_keys(od, ("position", "velocity", "radius"), f"obstacles[{i}]")
        if "position" not in od:
            raise ScenarioValidationError(f"obstacles[{i}].position is required")
        try:
            obstacles.append(
                Obstacle(
                    position=_triple(od["position"], f"obstacles[{i}].position"),
                    velocity=_triple(
                        od.get("velocity", (0.0, 0.0, 0.0)), f"obstacles[{i}].velocity"
                    ),
                    radius=float(od.get("radius", 0.25)),
                )
            )
        except ValueError as exc:
            raise ScenarioValidationError(_reroot(str(exc), f"obstacles[{i}]")) from exc

    sim = dict(doc.get("sim", {}))
    _check_keys(sim, ("dt", "t_end", "seed", "start", "z_setpoint"), "sim")
    flags = dict(doc.get("flags", {}))
    _check_keys(flags, ("face_target",), "flags")

    scenario = Scenario(
        name=str(doc.get("name", name_fallback)),
        target=target,
        obstacles=tuple(obstacles),
        gains=gains,
        controller=controller,
        plant=plant_kind,
        lag=lag,
        quad=quad,
        cascade=cascade,
        dt=float(sim.get("dt", 0.005)),
        t_end=float(sim.get("t_end", 60.0)),
        seed=int(sim.get("seed", 0)),
        standoff=standoff,
        start=_triple(sim.get("start", (0.0, 0.0, -1.0)), "sim.start"),
        z_setpoint=float(sim.get("z_setpoint", -1.0)),
        face_target=bool(flags.get("face_target", False)),
        provenance=provenance,
    )
    try:
        scenario.validate()
    except ValueError as exc:
        raise ScenarioValidationError(str(exc)) from exc
    return scenario


def _deep_merge(base: dict, override: dict, path: str, touched: list) -> dict:
    merged = dict(base)
    for key, value in override.items():
        sub_path = f"{path}.{key}" if path else str(key)
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value, sub_path, touched)
        else:
            merged[key] = value
            touched.append(sub_path)
    return merged


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file.

    The file may name a ``builtin`` scenario; its remaining sections
    are then deep-merged over the builtin's dict form, and the merge is
    recorded in the loaded scenario's provenance.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioLoadError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioLoadError(f"parse error in {path}{where}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ScenarioLoadError(f"{path}: top level must be a mapping")

    overridden: list = []
    if "builtin" in doc:
        base_name = doc["builtin"]
        builtins = builtin_scenarios()
        if base_name not in builtins:
            raise ScenarioValidationError(
                f"unknown builtin {base_name!r}; available: {sorted(builtins)}"
            )
        base = scenario_to_dict(builtins[base_name])
        override = {k: v for k, v in doc.items() if k != "builtin"}
        doc = _deep_merge(base, override, "", overridden)
        scenario = scenario_from_dict(doc, name_fallback=base_name)
        scenario.provenance["builtin"] = base_name
    else:
        scenario = scenario_from_dict(doc, name_fallback=path.stem)
    if overridden:
        scenario.provenance["overridden"] = overridden
    return scenario


def save_scenario(scenario: Scenario, path) -> None:
    path = Path(path)
    path.write_text(yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False))


# ---------------------------------------------------------------------------
# trajectory tables

def trajectory_matrix(log: TrajectoryLog) -> np.ndarray:
    """Log as one float matrix in TRAJECTORY_COLUMNS order."""
    return np.column_stack(
        [
            log.t, log.p, log.v, log.att, log.target_p, log.cmd_earth,
            log.term_att_p, log.term_rep_p, log.term_att_v, log.term_rep_v,
            log.term_close, log.gates.astype(float), log.sat.astype(float),
        ]
    )


def write_trajectory(log: TrajectoryLog, path) -> None:
    """Write the trajectory table as CSV (12 significant digits)."""
    path = Path(path)
    mat = trajectory_matrix(log)
    if mat.size and not np.all(np.isfinite(mat)):
        raise OutputError(f"refusing to write non-finite values to {path}")
    fmt = ["%.12g"] * (len(TRAJECTORY_COLUMNS) - 2) + ["%d", "%d"]
    try:
        np.savetxt(
            path, mat, fmt=fmt, delimiter=",",
            header=",".join(TRAJECTORY_COLUMNS), comments="",
        )
    except OSError as exc:
        raise OutputError(f"cannot write trajectory to {path}: {exc}") from exc


def read_trajectory(path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV back as a column-name -> array mapping."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise OutputError(f"{path}: unexpected trajectory header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(TRAJECTORY_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_COLUMNS)}


# ---------------------------------------------------------------------------
# metrics documents

METRICS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "metrics", "lyapunov", "provenance"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "metrics": {
            "type": "object",
            "required": [
                "scenario", "controller", "plant", "legs",
                "worst_overshoot_pct", "worst_settling_s", "all_settled",
                "lap_time_s", "min_clearance_m", "collisions",
                "max_speed_ms", "lyapunov_verdict",
            ],
            "properties": {
                "scenario": {"type": "string"},
                "controller": {"type": "string"},
                "plant": {"type": "string"},
                "legs": {"type": "array"},
                "worst_overshoot_pct": {"type": ["number", "null"]},
                "worst_settling_s": {"type": ["number", "null"]},
                "all_settled": {"type": "boolean"},
                "lap_time_s": {"type": ["number", "null"]},
                "min_clearance_m": {"type": ["number", "null"]},
                "collisions": {"type": "integer"},
                "max_speed_ms": {"type": "number"},
                "lyapunov_verdict": {"type": "string"},
            },
        },
        "lyapunov": {
            "type": "object",
            "required": ["verdict", "n_steps", "n_checked", "n_excluded"],
        },
        "provenance": {"type": "object"},
    },
}

COMPARISON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "comparison"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "comparison": {
            "type": "object",
            "required": ["scenario", "plant", "entries", "trends"],
        },
    },
}


def metrics_document(
    metrics: RunMetrics,
    scenario: Scenario,
    lyapunov: dict,
    overrides: Optional[list] = None,
) -> dict:
    """Assemble the run report: metrics plus a full provenance echo."""
    return {
        "schema_version": SCHEMA_VERSION,
        "metrics": metrics.to_dict(),
        "lyapunov": lyapunov,
        "provenance": {
            "params": scenario.quad.to_dict(),
            "gains": scenario.gains.to_dict(),
            "plant": {
                "kind": scenario.plant,
                "lag": scenario.lag.to_dict(),
                "cascade": scenario.cascade.to_dict(),
            },
            "sim": {
                "dt": scenario.dt, "t_end": scenario.t_end, "seed": scenario.seed,
                "start": list(scenario.start), "z_setpoint": scenario.z_setpoint,
            },
            "standoff": scenario.standoff,
            "scenario_provenance": scenario.provenance,
            "overrides": list(overrides or []),
        },
    }


def _write_json(doc: dict, schema: dict, path) -> None:
    path = Path(path)
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise OutputError(f"document for {path} violates schema: {exc.message}") from exc
    try:
        text = json.dumps(doc, indent=2, allow_nan=False)
    except ValueError as exc:
        raise OutputError(f"refusing to write non-finite values to {path}: {exc}") from exc
    try:
        path.write_text(text + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_metrics(doc: dict, path) -> None:
    _write_json(doc, METRICS_SCHEMA, path)


def read_metrics(path) -> dict:
    doc = json.loads(Path(path).read_text())
    jsonschema.validate(doc, METRICS_SCHEMA)
    return doc


def comparison_document(report: ComparisonReport) -> dict:
    return {"schema_version": SCHEMA_VERSION, "comparison": report.to_dict()}


def write_comparison(report: ComparisonReport, path) -> None:
    _write_json(comparison_document(report), COMPARISON_SCHEMA, path)

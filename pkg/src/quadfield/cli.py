"""Command-line entry point: single runs, controller comparisons, sweeps.

Exit codes: 0 success, 2 usage, 3 scenario validation/load failure,
4 numeric abort (non-finite state), 5 assertion failure (violated
trend or collision with --fail-on-collision).
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .diagnostics import monitor
from .fileio import (
    ScenarioLoadError,
    ScenarioValidationError,
    load_scenario,
    metrics_document,
    scenario_from_dict,
    scenario_to_dict,
    write_comparison,
    write_metrics,
    write_trajectory,
)
from .metrics import MetricsError, compare, compute_run_metrics
from .scenario import SimulationAbort, builtin_scenarios, run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4
EXIT_ASSERTION = 5

_SWEEP_FIELDS = (
    "status", "worst_overshoot_pct", "worst_settling_s", "lap_time_s",
    "min_clearance_m", "collisions", "max_speed_ms", "lyapunov",
)


class TrendAssertionError(RuntimeError):
    pass


def _resolve_scenario(source: str, overrides: list[str]) -> "Scenario":
    """Builtin name or file path, plus dotted-path --set overrides."""
    builtins = builtin_scenarios()
    if source in builtins:
        doc = scenario_to_dict(builtins[source])
    elif Path(source).exists():
        doc = scenario_to_dict(load_scenario(source))
    else:
        raise ScenarioValidationError(
            f"unknown scenario {source!r}: not a builtin "
            f"({', '.join(sorted(builtins))}) and not a readable file"
        )
    for item in overrides:
        if "=" not in item:
            raise ScenarioValidationError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ScenarioValidationError(f"--set {key}: bad value {raw!r}: {exc}")
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                raise ScenarioValidationError(f"--set: no section {key!r}")
            node = nxt
        node[parts[-1]] = value
    scenario = scenario_from_dict(doc, name_fallback=source)
    if overrides:
        scenario.provenance["overrides"] = list(overrides)
    return scenario


def _apply_common(doc_overrides: list[str], args) -> list[str]:
    sets = list(doc_overrides)
    if args.controller:
        sets.append(f"controller={args.controller}")
    if args.plant:
        sets.append(f"plant.kind={args.plant}")
    if args.seed is not None:
        sets.append(f"sim.seed={args.seed}")
    return sets


def _fmt(value, unit: str = "") -> str:
    if value is None:
        return "absent"
    if isinstance(value, float):
        return f"{value:.3g}{unit}"
    return f"{value}{unit}"


def _execute(scenario, out_dir: Path, overrides: list[str]):
    """Run one scenario and write its artifacts; returns the metrics."""
    log = run(scenario)
    report = monitor(log, scenario.gains)
    metrics = compute_run_metrics(log, scenario, lyapunov=report)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory(log, out_dir / "trajectory.csv")
    write_metrics(
        metrics_document(metrics, scenario, report.to_dict(), overrides),
        out_dir / "metrics.json",
    )
    return metrics


def _summary_line(m) -> str:
    return (
        f"{m.scenario} {m.controller} plant={m.plant} "
        f"lap={_fmt(m.lap_time_s, 's')} "
        f"overshoot={_fmt(m.worst_overshoot_pct, '%')} "
        f"settling={_fmt(m.worst_settling_s, 's')} "
        f"clearance={_fmt(m.min_clearance_m, 'm')} "
        f"collisions={m.collisions} lyapunov={m.lyapunov_verdict}"
    )


def cmd_run(args) -> int:
    sets = _apply_common(args.set or [], args)
    scenario = _resolve_scenario(args.scenario, sets)
    out_dir = Path(args.out) / f"{scenario.name}-{scenario.controller}"
    metrics = _execute(scenario, out_dir, sets)
    print(_summary_line(metrics))
    print(f"artifacts: {out_dir}")
    if args.fail_on_collision and metrics.collisions > 0:
        print(f"FAIL: {metrics.collisions} collision(s)", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


def cmd_compare(args) -> int:
    sets = _apply_common(args.set or [], args)
    base = _resolve_scenario(args.scenario, sets)
    out_root = Path(args.out) / f"{base.name}-compare"
    results = []
    for controller in args.controllers:
        scenario = _resolve_scenario(args.scenario, sets + [f"controller={controller}"])
        results.append(_execute(scenario, out_root / controller, sets))
    report = compare(results)
    write_comparison(report, out_root / "comparison.json")
    print(report.render_text())
    print(f"artifacts: {out_root}")
    if args.assert_trends:
        required = ("epfc_overshoot_lt_pfc", "epfc_settling_le_pfc")
        for trend in required:
            if trend not in report.trends:
                raise TrendAssertionError(
                    f"trend {trend} unavailable (needs pfc and epfc runs)"
                )
            if not report.trends[trend]:
                raise TrendAssertionError(f"trend violated: {trend}")
    return EXIT_OK


def _parse_grid(specs: list[str]) -> list[tuple[str, list]]:
    grid = []
    for spec in specs:
        if "=" not in spec:
            raise ScenarioValidationError(f"--grid expects key=v1,v2,..., got {spec!r}")
        key, _, raw = spec.partition("=")
        values = [yaml.safe_load(v) for v in raw.split(",") if v != ""]
        if not values:
            raise ScenarioValidationError(f"--grid {key}: no values")
        grid.append((key, values))
    return grid


def _sweep_worker(scenario) -> dict:
    try:
        log = run(scenario)
        metrics = compute_run_metrics(log, scenario)
        return {
            "status": "ok",
            "worst_overshoot_pct": metrics.worst_overshoot_pct,
            "worst_settling_s": metrics.worst_settling_s,
            "lap_time_s": metrics.lap_time_s,
            "min_clearance_m": metrics.min_clearance_m,
            "collisions": metrics.collisions,
            "max_speed_ms": metrics.max_speed_ms,
            "lyapunov": metrics.lyapunov_verdict,
        }
    except Exception as exc:  # per-row failure must not kill the sweep
        return {"status": f"error: {type(exc).__name__}: {exc}"}


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def cmd_sweep(args) -> int:
    sets = _apply_common(args.set or [], args)
    grid = _parse_grid(args.grid)
    keys = [k for k, _ in grid]
    points = list(itertools.product(*[values for _, values in grid]))
    scenarios = []
    for point in points:
        point_sets = sets + [f"{k}={v}" for k, v in zip(keys, point)]
        scenarios.append(_resolve_scenario(args.scenario, point_sets))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_worker, scenarios))
    else:
        rows = [_sweep_worker(s) for s in scenarios]
    out_root = Path(args.out) / f"{scenarios[0].name}-sweep"
    out_root.mkdir(parents=True, exist_ok=True)
    header = keys + list(_SWEEP_FIELDS)
    lines = [",".join(header)]
    for point, row in zip(points, rows):
        cells = [_csv_cell(v) for v in point]
        cells += [_csv_cell(row.get(f)) for f in _SWEEP_FIELDS]
        lines.append(",".join(cells))
    summary = "\n".join(lines) + "\n"
    (out_root / "sweep.csv").write_text(summary)
    print(summary, end="")
    print(f"artifacts: {out_root}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadfield",
        description="Deterministic quadcopter potential-field simulation runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("scenario", help="builtin scenario name or scenario file path")
        p.add_argument("--controller", choices=("pfc", "epfc"))
        p.add_argument("--plant", choices=("kinematic", "lag", "full"))
        p.add_argument("--out", default="runs", help="output directory root")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path scenario override, e.g. sim.t_end=30")
        p.add_argument("--seed", type=int, default=None)

    p_run = sub.add_parser("run", help="run one scenario and write artifacts")
    add_common(p_run)
    p_run.add_argument("--fail-on-collision", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several controllers on one scenario")
    add_common(p_cmp)
    p_cmp.add_argument("controllers", nargs="+", choices=("pfc", "epfc"),
                       help="two or more controllers to compare")
    p_cmp.add_argument("--assert-trends", action="store_true")
    p_cmp.set_defaults(fn=cmd_compare)

    p_swp = sub.add_parser("sweep", help="grid sweep over scenario parameters")
    add_common(p_swp)
    p_swp.add_argument("--grid", action="append", required=True,
                       metavar="KEY=V1,V2,...", help="sweep axis (repeatable)")
    p_swp.add_argument("--jobs", type=int, default=1)
    p_swp.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command == "compare" and len(args.controllers) < 2:
        print("usage error: compare needs at least two controllers", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (ScenarioLoadError, ScenarioValidationError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TrendAssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())

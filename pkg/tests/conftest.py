"""Shared fixtures: expensive simulation runs are computed once per session."""

from dataclasses import replace

import numpy as np
import pytest

import quadfield as qf
from quadfield.metrics import compute_run_metrics
from quadfield.scenario import WP_INDEX_SHIFT, TrajectoryLog


@pytest.fixture(scope="session")
def builtins():
    return qf.builtin_scenarios()


@pytest.fixture(scope="session")
def sim_course_pair(builtins):
    """(scenario, log, metrics) for both controllers on the waypoint course."""
    out = {}
    for ctrl in ("pfc", "epfc"):
        scenario = replace(builtins["sim-course"], controller=ctrl)
        log = qf.run(scenario)
        out[ctrl] = (scenario, log, compute_run_metrics(log, scenario))
    return out


@pytest.fixture(scope="session")
def static_target_run(builtins):
    scenario = builtins["static-target"]
    log = qf.run(scenario)
    return scenario, log, compute_run_metrics(log, scenario)


def make_log(
    t,
    p,
    target_p=None,
    v=None,
    target_v=None,
    gates=None,
    target_kind="StaticPoint",
    arrival_times=None,
    wp_index=None,
):
    """Minimal hand-built trajectory log for metrics/diagnostics tests."""
    t = np.asarray(t, dtype=float)
    n = len(t)
    p = np.asarray(p, dtype=float).reshape(n, 3)
    zeros = np.zeros((n, 3))

    def arr(x):
        return zeros.copy() if x is None else np.asarray(x, dtype=float).reshape(n, 3)

    gates_arr = np.zeros(n, dtype=np.uint32) if gates is None else np.asarray(
        gates, dtype=np.uint32
    )
    if wp_index is not None:
        gates_arr = gates_arr | (np.asarray(wp_index, dtype=np.uint32) << WP_INDEX_SHIFT)
    return TrajectoryLog(
        t=t, p=p, v=arr(v), att=zeros.copy(),
        target_p=arr(target_p), target_v=arr(target_v),
        cmd_earth=zeros.copy(), cmd_body=zeros.copy(),
        term_att_p=zeros.copy(), term_rep_p=zeros.copy(),
        term_att_v=zeros.copy(), term_rep_v=zeros.copy(),
        term_close=zeros.copy(), gates=gates_arr,
        sat=np.zeros(n, dtype=bool),
        scenario_name="synthetic", controller="epfc", plant="lag",
        dt=float(t[1] - t[0]) if n > 1 else 0.0,
        target_kind=target_kind,
        advance_steps=[], arrival_times=arrival_times or {},
    )

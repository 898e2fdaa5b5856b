import numpy as np
import pytest
from hypothesis import given, strategies as st

import quadfield as qf
from quadfield.diagnostics import lyapunov_value, monitor
from quadfield.pfc import PfcGains
from quadfield.scenario import GATE_POS_REP

from conftest import make_log

GAINS = PfcGains()

coords = st.floats(-50.0, 50.0, allow_nan=False)


def test_lyapunov_value_equilibrium():
    assert lyapunov_value(np.zeros(3), np.zeros(3), 1.0, 1.0) == 0.0


def test_lyapunov_value_hand_computed():
    out = lyapunov_value(np.array([1.0, 0, 0]), np.array([0, 2.0, 0]), 1.0, 1.0)
    assert out == pytest.approx(2.5)


@given(st.tuples(coords, coords, coords), st.tuples(coords, coords, coords))
def test_lyapunov_value_nonnegative(p, v):
    assert lyapunov_value(np.array(p), np.array(v), GAINS.k_att_p, GAINS.k_att_v) >= 0.0


def test_lyapunov_zero_iff_both_zero():
    val = lyapunov_value(np.array([1e-7, 0, 0]), np.zeros(3), 1.0, 1.0)
    assert val > 1e-15
    assert lyapunov_value(np.zeros(3), np.zeros(3), 1.0, 1.0) < 1e-12


def test_monitor_exponential_kinematic_run(builtins):
    from dataclasses import replace

    scenario = replace(
        builtins["static-target"],
        plant="kinematic", controller="pfc", standoff=0.0,
        target=qf.StaticPoint((1.5, 0.4, -1.0)),
        dt=0.002, t_end=5.0,
    )
    log = qf.run(scenario)
    report = monitor(log, scenario.gains)
    assert report.verdict == "PASS"
    # strictly decreasing after the start-up step
    assert np.all(np.diff(report.values[1:]) < 0.0)


def test_monitor_stationary_at_target():
    n = 100
    t = np.arange(n) * 0.01
    p = np.tile([1.0, 2.0, 3.0], (n, 1))
    log = make_log(t, p, target_p=p)
    report = monitor(log, GAINS)
    assert report.verdict == "PASS"
    assert np.all(report.values == 0.0)


def test_monitor_excludes_repulsive_intervals():
    n = 50
    t = np.arange(n) * 0.01
    p = np.linspace([0, 0, 0], [1, 0, 0], n)
    gates = np.zeros(n, dtype=np.uint32)
    gates[20:30] = GATE_POS_REP
    log = make_log(t, p, target_p=np.tile([1.0, 0, 0], (n, 1)), gates=gates)
    report = monitor(log, GAINS)
    assert report.n_excluded >= 10
    assert any(a <= 20 <= b for a, b in report.excluded_intervals)


def test_monitor_flags_increases():
    n = 40
    t = np.arange(n) * 0.01
    # error grows after mid-run with no gate open: must fail
    err = np.concatenate([np.linspace(2.0, 1.0, 20), np.linspace(1.0, 1.5, 20)])
    p = np.zeros((n, 3))
    p[:, 0] = err
    log = make_log(t, p)
    report = monitor(log, GAINS)
    assert report.verdict == "FAIL"
    assert report.n_increases > 0
    assert report.max_increase > 0


def test_monitor_empty_log_rejected():
    log = make_log(np.zeros(0), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        monitor(log, GAINS)


def test_monitor_single_record_passes():
    log = make_log([0.0], [[1.0, 0, 0]])
    assert monitor(log, GAINS).verdict == "PASS"


def test_monitor_report_serializable():
    n = 30
    t = np.arange(n) * 0.01
    p = np.linspace([2, 0, 0], [0, 0, 0], n)
    report = monitor(make_log(t, p), GAINS)
    doc = report.to_dict()
    assert doc["verdict"] == "PASS"
    assert doc["n_steps"] == n - 1
    assert isinstance(doc["excluded_intervals"], list)


def test_static_target_lag_run_passes(static_target_run):
    scenario, log, metrics = static_target_run
    report = monitor(log, scenario.gains)
    assert report.verdict == "PASS"

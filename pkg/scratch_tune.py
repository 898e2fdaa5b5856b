"""Scratch: grid-search default gains against the acceptance trends."""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import quadfield as qf
from quadfield.metrics import compute_run_metrics


def evaluate(cfg):
    k_att, tau, k_rep, k_close, vmax = cfg
    base = qf.builtin_scenarios()["sim-course"]
    gains = replace(base.gains, k_att_p=k_att, k_rep_p=k_rep, k_closing=k_close,
                    v_cmd_max=vmax)
    lag = replace(base.lag, tau_xy=tau)
    res = {}
    for ctrl in ("pfc", "epfc"):
        s = replace(base, controller=ctrl, gains=gains, lag=lag, t_end=80.0)
        try:
            log = qf.run(s)
            m = compute_run_metrics(log, s, lyapunov=None)
            res[ctrl] = m
        except Exception as exc:
            return cfg, f"ERR {ctrl}: {exc}", None
    p, e = res["pfc"], res["epfc"]
    ok = (
        p.lap_time_s is not None
        and e.lap_time_s is not None
        and p.worst_overshoot_pct is not None and p.worst_overshoot_pct >= 11.0
        and e.worst_overshoot_pct is not None and e.worst_overshoot_pct <= 1.5
        and e.worst_overshoot_pct < p.worst_overshoot_pct
        and e.all_settled
        and e.settling_for_comparison <= p.settling_for_comparison
        and p.collisions == 0 and e.collisions == 0
        and p.min_clearance_m is not None and e.min_clearance_m is not None
        and e.min_clearance_m > p.min_clearance_m + 0.03
    )
    line = (f"att={k_att} tau={tau} rep={k_rep} close={k_close} vmax={vmax} | "
            f"P: ov={p.worst_overshoot_pct:.1f} cl={p.min_clearance_m:.3f} "
            f"lap={p.lap_time_s} st={p.settling_for_comparison:.4g} | "
            f"E: ov={e.worst_overshoot_pct:.2f} cl={e.min_clearance_m:.3f} "
            f"lap={e.lap_time_s} st={e.settling_for_comparison:.4g} coll={e.collisions}")
    return cfg, line, ok


def main():
    pairs = [(0.5, 2.0), (1.0, 1.0), (2.0, 0.5)]
    grid = [
        (a, t, r, c, v)
        for (a, t) in pairs
        for r in (0.15, 0.25, 0.4)
        for c in (0.5, 1.0, 1.5)
        for v in (1.0, 1.5)
    ]
    with ProcessPoolExecutor(max_workers=8) as pool:
        for cfg, line, ok in pool.map(evaluate, grid):
            print(("PASS " if ok else "     ") + line, flush=True)


if __name__ == "__main__":
    main()

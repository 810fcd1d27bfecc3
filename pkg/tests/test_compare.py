import csv
import warnings

import numpy as np
import pytest

from railfd.compare import (
    SWEEP_HEADER,
    compare,
    low_demand_error_scale,
    micro_exit_curve,
    micro_passenger_exits,
    relative_jumps,
    run_sweep,
    spearman,
    sweep_threads,
    write_sweep_csv,
)
from railfd.fd import DEFAULT_PARAMS
from railfd.macro import free_flow_travel_time
from railfd.micro import run_micro
from railfd.scenario import Boundary, baseline


@pytest.fixture(scope="module")
def base():
    return compare(baseline())


def test_baseline_report(base):
    r = base.report
    assert r.completed and r.gridlock is None
    assert r.ttt_macro < r.ttt_micro
    assert r.relative_error == pytest.approx((r.ttt_macro - r.ttt_micro) / r.ttt_micro)
    assert r.max_dev_D < 2.0
    assert r.max_dev_D <= r.max_dev_D_step + 1e-12
    assert not r.bunching_flag


def test_shared_boundary(base):
    assert np.array_equal(base.macro.A, base.boundary.A)
    assert base.micro.boundary is base.boundary


def test_exit_curve_passes_through_events(base):
    c = micro_exit_curve(base.micro)
    tr = next(t for t in base.micro.trains if t.exit is not None and t.exit > 1.0)
    assert c(tr.exit) == pytest.approx(tr.id)


def test_micro_passenger_output(base):
    t, dp = micro_passenger_exits(base.micro, -100.0)
    assert t[0] == 0.0 and dp[0] == -100.0
    assert np.all(np.diff(dp) >= 0) and np.all(np.diff(t) >= 0)


def test_gridlock_cell():
    c = compare(baseline(a2=18.0, ap2=0.6 * 36000, horizon=8.0))
    r = c.report
    assert r.gridlock is not None and c.macro is None
    assert r.relative_error is None and r.ttt_macro is None
    assert not r.completed
    assert r.to_dict()["gridlock"]["k"] >= r.to_dict()["gridlock"]["k_jam"]


def test_small_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("RAILFD_THREADS", "2")
    assert sweep_threads() == 2
    reps = run_sweep(baseline(), a2_values=(12.0,), ap2_ratios=(0.1, 0.2, 0.3), horizon=6.0)
    assert [r.ap2_ratio for r in reps] == pytest.approx([0.1, 0.2, 0.3])
    assert all(r.completed and r.gridlock is None and not r.bunching_flag for r in reps)
    # low demand: small errors, growing with demand
    errs = [abs(r.relative_error) for r in reps]
    assert errs == sorted(errs) and errs[0] < 0.05
    assert spearman([r.ap2_ratio for r in reps], errs) == pytest.approx(1.0)
    assert len(relative_jumps(reps, 12.0)) == 2
    assert low_demand_error_scale(reps, 12.0) == pytest.approx(np.mean(errs[:2]))
    serial = run_sweep(baseline(), a2_values=(12.0,), ap2_ratios=(0.1, 0.2, 0.3), horizon=6.0, workers=1)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in reps]

    path = tmp_path / "s.csv"
    write_sweep_csv(reps, path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == SWEEP_HEADER
    assert len(rows) == 4
    assert float(rows[1][2]) == pytest.approx(reps[0].ttt_micro, rel=1e-8)


def test_free_flow_travel_time_matches_micro():
    cfg = baseline(a2=10.0, ap2=3600.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_micro(Boundary.sample(cfg), DEFAULT_PARAMS)
    # nine dwell-and-run cycles: from leaving the first platform to leaving the last
    tts = [tr.exit - tr.events[0].t_dep for tr in res.trains if tr.exit is not None and tr.entry > 0]
    T = free_flow_travel_time(10.0, 3600.0, DEFAULT_PARAMS)
    assert max(abs(t - T) / T for t in tts) < 0.02

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railfd.scenario import CONFIG_KEYS, Boundary, ConfigError, ScenarioConfig, baseline, tent


def test_profile_values():
    cfg = baseline()
    b = Boundary.sample(cfg.with_(horizon=8.0))
    assert b.a_at(2.0) == pytest.approx(15.0)
    assert b.ap_at(2.0) == pytest.approx(18000.0)
    assert b.a_at(1.0) == pytest.approx(12.5)
    assert b.a_at(6.0) == pytest.approx(10.0)
    assert b.a_at(-1.0) == 10.0


def test_baseline_injects_fifty_trains():
    b = Boundary.sample(baseline())
    assert b.A[-1] == pytest.approx(50.0, abs=1e-9)


def test_constant_supply_entry_times():
    b = Boundary.sample(baseline(a2=10.0))
    assert [b.count_time(n) for n in (1, 2, 3)] == pytest.approx([0.1, 0.2, 0.3], abs=1e-12)
    assert b.count_time(-2) == pytest.approx(-0.2)


def test_boundary_is_read_only():
    b = Boundary.sample(baseline())
    with pytest.raises(ValueError):
        b.a[0] = 1.0


def test_config_roundtrip(tmp_path):
    cfg = baseline(a2=18.0, horizon=8.0, lam=2.0)
    path = tmp_path / "c.json"
    cfg.dump(path)
    assert set(json.loads(path.read_text())) == CONFIG_KEYS
    assert ScenarioConfig.load(path) == cfg


def test_config_rejects_unknown_and_missing_keys(tmp_path):
    d = baseline().to_dict()
    d["extra"] = 1
    with pytest.raises(ConfigError, match="unexpected"):
        ScenarioConfig.from_dict(d)
    d = baseline().to_dict()
    del d["lambda"]
    with pytest.raises(ConfigError, match="missing"):
        ScenarioConfig.from_dict(d)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(bad)


@pytest.mark.parametrize(
    "changes", [dict(a2=5.0), dict(a0=0.0, a2=0.0), dict(ap2=100.0), dict(horizon=3.0), dict(dt=0.0), dict(lam=0.0)]
)
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        baseline(**changes)


def test_feasibility_warning():
    assert baseline().feasibility_warnings() == []
    assert baseline(ap2=36000.0).feasibility_warnings()


@settings(max_examples=100, deadline=None)
@given(st.floats(1, 30), st.floats(0, 20), st.floats(0, 30000), st.floats(0, 5000))
def test_cumulative_counts(a0, da, ap0, dap):
    cfg = ScenarioConfig(a0=a0, a2=a0 + da, ap0=ap0, ap2=ap0 + dap, horizon=5.0)
    b = Boundary.sample(cfg)
    assert np.all(np.diff(b.A) > 0)
    assert np.all(np.diff(b.A_p) >= 0)
    # the tent integrates exactly under the trapezoid rule once the kinks sit on the grid
    assert b.A[-1] == pytest.approx(5 * a0 + 2 * da, rel=1e-9)
    assert b.A_p[-1] == pytest.approx(5 * ap0 + 2 * dap, rel=1e-9, abs=1e-6)
    t = float(np.linspace(0, 5, 7)[3])
    assert b.count_time(b.A_at(t)) == pytest.approx(t, abs=1e-9)


def test_tent_shape():
    t = np.array([-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    assert tent(t, 10, 20).tolist() == [10, 10, 15, 20, 15, 10, 10]

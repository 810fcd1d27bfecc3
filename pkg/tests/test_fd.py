import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railfd import fd
from railfd.fd import DEFAULT_PARAMS, OperatingParams, Regime, SteadySpec

from strategies import demand, operating_params, steady_specs

P = DEFAULT_PARAMS


def hand_free(k, q_p):
    # free branch evaluated from first principles: one cycle is a dwell plus a run of l at v_f
    return (3.0 * k - q_p / 36000.0) / (10 / 3600 + 3 / 70)


def hand_critical(q_p):
    """Independent evaluation: the critical state is a steady operation at v_f with no slack."""
    H = (10 / 3600 + 1 / 70 + 1 / 70) / (1 - q_p / 36000)
    k = (q_p * H / 36000 + 10 / 3600 + 3 / 70) / (3 * H)
    return 1 / H, k


# --- hand-evaluated values ---------------------------------------------------


@pytest.mark.parametrize("k, q_p, expected", [(0.3, 0.0, 19.72), (0.3, 16000.0, 9.98)])
def test_free_branch_values(k, q_p, expected):
    q = fd.fd_flow(k, q_p, P)
    assert q == pytest.approx(hand_free(k, q_p), rel=1e-12)
    assert q == pytest.approx(expected, abs=0.005)


def test_critical_point_values():
    q, k = fd.critical_point(16000, P)
    assert q == pytest.approx(17.72, abs=0.005)
    assert (q, k) == pytest.approx(hand_critical(16000), rel=1e-12)
    assert k == pytest.approx(0.42, abs=0.005)
    q0, _ = fd.critical_point(0, P)
    assert q0 == pytest.approx(31.90, abs=0.005)


def test_critical_point_maximises_flow():
    for q_p in (0, 8000, 16000, 30000):
        q_star, k_star = fd.critical_point(q_p, P)
        k_j = fd.jam_density(q_p, P)
        grid = [k_j * i / 20000 for i in range(1, 20001)]
        best = max(fd.fd_flow(k, q_p, P) for k in grid)
        assert best <= q_star * (1 + 1e-12)
        assert best == pytest.approx(q_star, rel=1e-3)


def test_zero_flow_intercept():
    for q_p in (1000, 16000, 35000):
        k0 = fd.zero_flow_density(q_p, P)
        assert fd.fd_flow(k0, q_p, P) == pytest.approx(0.0, abs=1e-12)
        assert fd.is_infeasible_demand(0.5 * k0, q_p, P)
        assert fd.fd_flow(0.5 * k0, q_p, P) == 0.0


def test_jam_density_values():
    assert fd.jam_density(0, P) == pytest.approx(1.0 / P.delta, rel=1e-12)
    ks = [fd.jam_density(q_p, P) for q_p in range(0, 36000, 500)]
    assert all(b < a for a, b in zip(ks, ks[1:]))


def test_critical_line_table1():
    slope, intercept = fd.critical_line(P)
    assert slope == pytest.approx(3 / (2 / 70 - 1 / 70), rel=1e-12)
    assert intercept == pytest.approx(-70.0, rel=1e-12)
    assert fd.critical_line_sign(P) == 1


def test_critical_line_negative_sign():
    # (l - delta)/v_f < tau: the paradoxical orientation
    p = OperatingParams(tau=3 / 70)
    assert fd.critical_line_sign(p) == -1
    k1 = fd.critical_point(0, p)[1]
    k2 = fd.critical_point(20000, p)[1]
    assert k2 > k1  # higher demand moves the critical density up, so more density is free flow


def test_degenerate_slope():
    with pytest.raises(fd.DegenerateSlope):
        fd.critical_line(OperatingParams(tau=2 / 70))


def test_regimes_table1():
    assert fd.regime(0.3, 16000, P) is Regime.FREE_FLOW
    assert fd.regime(0.55, 16000, P) is Regime.CONGESTED
    _, k_star = fd.critical_point(16000, P)
    assert fd.regime(k_star, 16000, P) is Regime.CRITICAL


def test_edie_hand_example():
    s = fd.edie_steady_state(SteadySpec(0.1, 70.0, 0.1 - fd.steady_headway(0, 0, P), 0.0), P)
    assert s.q == pytest.approx(10.0)
    assert s.k == pytest.approx((10 / 3600 + 3 / 70) / 0.3, rel=1e-12)
    assert s.k == pytest.approx(0.1521, abs=5e-5)
    assert s.v_bar == pytest.approx(65.74, abs=0.005)


def test_steady_headway_values():
    assert fd.steady_headway(16000, 0, P) == pytest.approx(0.05643, abs=5e-6)
    assert fd.steady_headway(16000, 0, P) == pytest.approx(1 / fd.critical_point(16000, P)[0], rel=1e-12)
    assert fd.steady_headway(0, 0, P) == pytest.approx(0.031349, abs=5e-7)
    assert fd.steady_headway(16000, 0.01, P) - fd.steady_headway(16000, 0, P) == pytest.approx(0.01, abs=1e-15)


def test_critical_spec_matches_critical_point():
    s = fd.edie_steady_state(SteadySpec.build(16000, P), P)
    q, k = fd.critical_point(16000, P)
    assert s.q == pytest.approx(q, rel=1e-12)
    assert s.k == pytest.approx(k, rel=1e-12)
    assert s.regime is Regime.CRITICAL


@pytest.mark.parametrize(
    "call",
    [
        lambda: fd.critical_point(36000, P),
        lambda: fd.critical_point(-1, P),
        lambda: fd.fd_flow(0.0, 0, P),
        lambda: fd.steady_headway(0, -0.1, P),
        lambda: OperatingParams(delta=3.0),
        lambda: OperatingParams(v_max=60.0),
        lambda: fd.edie_steady_state(SteadySpec(0.2, 70.0, 0.0, 0.0), P),  # h_f inconsistent with H
        lambda: fd.congested_speed_for_density(0.3, 16000, P),
    ],
)
def test_invalid_inputs(call):
    with pytest.raises(fd.InvalidParams):
        call()


# --- properties ----------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_edie_states_lie_on_fd(data):
    p = data.draw(st.one_of(st.just(P), operating_params()))
    spec = data.draw(steady_specs(p))
    s = fd.edie_steady_state(spec, p)
    assert s.q == pytest.approx(1.0 / spec.H, rel=1e-15)
    assert abs(s.q - fd.fd_flow(s.k, s.q_p, p)) / s.q < 1e-9
    assert fd.regime(s.k, s.q_p, p) is spec.regime(p)


@settings(max_examples=200, deadline=None)
@given(operating_params(), st.lists(st.floats(0, 0.99), min_size=3, max_size=8))
def test_critical_points_collinear(p, ratios):
    for r in ratios:
        q, k = fd.critical_point(r * p.mu_p, p)
        assert fd.critical_line_check(q, k, p)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_fd_shape(data):
    p = data.draw(st.one_of(st.just(P), operating_params()))
    q_p = data.draw(demand(p))
    q_star, k_star = fd.critical_point(q_p, p)
    k_j = fd.jam_density(q_p, p)
    assert fd.fd_flow(k_j, q_p, p) == pytest.approx(0.0, abs=1e-9 * q_star)
    assert fd.fd_flow(k_star, q_p, p) == pytest.approx(q_star, rel=1e-12)
    k1, k2 = sorted(data.draw(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=2)))
    # non-decreasing below k*, non-increasing above
    a, b = k1 * k_star, k2 * k_star
    assert fd.fd_flow(a, q_p, p) <= fd.fd_flow(b, q_p, p) + 1e-12
    a, b = k_star + k1 * (k_j - k_star), k_star + k2 * (k_j - k_star)
    assert fd.fd_flow(a, q_p, p) >= fd.fd_flow(b, q_p, p) - 1e-12
    assert fd.fd_flow(1.5 * k_j, q_p, p) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_congested_speed_inversion(data):
    p = data.draw(st.one_of(st.just(P), operating_params()))
    q_p = data.draw(demand(p))
    _, k_star = fd.critical_point(q_p, p)
    k = k_star + data.draw(st.floats(0.01, 0.99)) * (fd.jam_density(q_p, p) - k_star)
    v = fd.congested_speed_for_density(k, q_p, p)
    assert 0 < v < p.v_f
    s = fd.edie_steady_state(SteadySpec.build(q_p, p, v=v), p)
    assert s.k == pytest.approx(k, rel=1e-9)
    assert s.q == pytest.approx(fd.fd_flow(k, q_p, p), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(operating_params(), st.floats(0, 0.95), st.floats(0, 0.95))
def test_jam_density_monotone_in_demand(p, r1, r2):
    lo, hi = sorted((r1, r2))
    if hi - lo < 1e-6:
        return
    # with a rising critical line, higher demand lowers the jam density
    if fd.critical_line_sign(p) > 0:
        assert fd.jam_density(hi * p.mu_p, p) < fd.jam_density(lo * p.mu_p, p)

import math

import numpy as np
import pytest

import perfdyn as pd


def figure_spec(L=14.0):
    return pd.MarketSpec(np.array([L]), np.zeros(2), np.diag([3.0, 7.0]), np.zeros(2))


def test_spec_roundtrip():
    s = figure_spec()
    assert s.d == 2 and s.n == 1
    assert pd.MarketSpec.from_json(s.to_json()) == s
    with pytest.raises(ValueError):
        pd.MarketSpec(np.array([1.0]), np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))


def test_gradient_at_stable_point():
    s = figure_spec()
    p = np.array([[0.7, 0.3]])
    g = pd.gradient(s, p, p[0])
    # 2 (1 + L) A p, with b = 0
    np.testing.assert_allclose(g, 2 * 15 * np.array([3 * 0.7, 7 * 0.3]), rtol=1e-14)
    assert np.abs(pd.xi(s, p)).max() <= 1e-10


def test_stable_point_and_rates():
    s = figure_spec()
    r = pd.find_stable_point(s, tol=1e-10)
    assert r["theta_star"][0, 0] == pytest.approx(0.7, abs=1e-8)
    assert r["proper"]
    assert pd.check_stable(s, r["theta_star"], 1e-8)
    assert pd.check_optimal(s, r["theta_star"], 1e-8)
    rates = pd.safe_learning_rate(s, r["theta_star"])
    assert rates["eta_bound_gradient"] == pytest.approx(1 / 420)
    assert 0 < rates["eta_star"] <= rates["eta_bound_gradient"]


def test_simulate_regimes():
    s = figure_spec()
    slow = pd.simulate(s, np.array([[0.2, 0.8]]), 0.001, 100)
    assert abs(slow["final"][0, 0] - 0.7) <= 0.01
    assert len(slow["times"]) == 101
    assert all(np.diff(slow["potential"]) <= 1e-9)

    wild = pd.simulate(s, np.array([[0.2, 0.8]]), 0.05, 100)
    tail = [st[0, 0] for st in wild["states"][50:]]
    assert max(tail) - min(tail) > 0.3
    for st in wild["states"]:
        assert abs(st.sum() - 1) <= 1e-12


def test_eg_step_matches_reduced_map():
    s = figure_spec()
    u, v = pd.alpha_beta(s, 0.05, 14.0)
    assert v == pytest.approx(0.7)
    x = 0.2
    nxt = pd.eg_step(s, np.array([[x, 1 - x]]), 0.05)
    assert nxt[0, 0] == pytest.approx(pd.reduced_map(u, v, x), abs=1e-14)


def test_ode_and_stochastic():
    s = figure_spec()
    ode = pd.integrate_ode(s, np.array([[0.2, 0.8]]), 1.0, 50.0, 1e-3, record_every=100)
    assert abs(ode["final"][0, 0] - 0.7) <= 1e-4

    a = pd.stochastic_simulate(s, np.array([[0.2, 0.8]]), 0.001, 100, 100, 3)
    b = pd.stochastic_simulate(s, np.array([[0.2, 0.8]]), 0.001, 100, 100, 3)
    np.testing.assert_array_equal(a["final"], b["final"])
    assert abs(a["final"][0, 0] - 0.7) <= 0.05


def test_chaos_tools():
    assert pd.period3_certificate(40.0, 0.3)["certified"]
    assert not pd.period3_certificate(15.0, 0.3)["certified"]
    assert pd.lyapunov_exponent(0.3, 0.7, 0.2) == pytest.approx(math.log(abs(1 - 0.3 * 0.7 * 0.3)), abs=1e-6)
    cap = pd.carrying_capacity(pd.MarketSpec(np.array([14.0]), np.zeros(2), np.diag([7.0, 3.0]), np.zeros(2)),
                               0.05, 1.0, 60.0)
    assert 30 <= cap["L_star"] <= 40

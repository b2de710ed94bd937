"""Tests of the benchmark problems and the registry."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaosbsde.brownian import CorrelationSpec
from chaosbsde.errors import ConfigurationError
from chaosbsde.problems import (
    BasketDriverSpec,
    BlackScholesParams,
    ProblemSetup,
    bs_path,
    driver_borrowing,
    driver_cos,
    get_problem,
    problem_names,
    register_problem,
    terminal_barrier_call,
    terminal_basket_put,
    terminal_sup_bm,
)


def paths_from_nodes(nodes) -> np.ndarray:
    arr = np.asarray(nodes, dtype=np.float64)
    return arr.reshape(1, -1, 1)


# --- terminal functionals ---------------------------------------------------


def test_sup_bm_examples():
    assert terminal_sup_bm(paths_from_nodes([0.0, 0.0, 0.0]))[0] == 0.0
    assert terminal_sup_bm(paths_from_nodes([0.0, 0.2, 0.5, 0.9]))[0] == 0.9
    assert terminal_sup_bm(paths_from_nodes([0.0, 1.0, -1.0]))[0] == 1.0


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12))
def test_sup_bm_dominates_terminal_node(increments):
    nodes = [0.0] + list(np.cumsum(increments))
    value = terminal_sup_bm(paths_from_nodes(nodes))[0]
    assert value >= nodes[-1] - 1e-15


def test_barrier_call_examples():
    flat = np.full((1, 5, 1), 1.0)
    assert terminal_barrier_call(flat, 0.9, 0.85)[0] == pytest.approx(0.1)
    dipped = flat.copy()
    dipped[0, 2, 0] = 0.84
    assert terminal_barrier_call(dipped, 0.9, 0.85)[0] == 0.0
    low = np.full((1, 5, 1), 0.9)
    low[0, -1, 0] = 0.8
    assert terminal_barrier_call(low, 0.9, 0.85)[0] == 0.0


@given(
    st.lists(st.floats(0.5, 2.0), min_size=2, max_size=10),
    st.floats(0.5, 1.5),
    st.floats(0.4, 1.0),
)
def test_barrier_never_exceeds_vanilla(nodes, strike, barrier):
    grid = np.asarray(nodes).reshape(1, -1, 1)
    knocked = terminal_barrier_call(grid, strike, barrier)[0]
    vanilla = max(nodes[-1] - strike, 0.0)
    assert 0.0 <= knocked <= vanilla + 1e-15


def test_basket_put_examples():
    assets = np.full((1, 3, 5), 120.0)
    assert terminal_basket_put(assets, 95.0)[0] == 0.0
    assets[0, -1, :] = [80.0, 90.0, 100.0, 70.0, 60.0]  # mean 80
    assert terminal_basket_put(assets, 95.0)[0] == pytest.approx(15.0)


# --- asset path map ----------------------------------------------------------


def test_bs_path_drift_only():
    params = BlackScholesParams(s0=1.0, r=0.01, mu=0.03, sigma=0.2)
    paths = np.zeros((1, 5, 1))
    assets = bs_path(paths, params, T=1.0)
    t = np.linspace(0, 1, 5)
    np.testing.assert_allclose(
        assets[0, :, 0], np.exp((0.03 - 0.02) * t), rtol=1e-14
    )


def test_bs_path_matches_direct_formula():
    params = BlackScholesParams(s0=1.0, r=0.01, mu=0.01, sigma=0.2)
    rng = np.random.default_rng(4)
    paths = np.concatenate(
        [np.zeros((3, 1, 1)), rng.normal(size=(3, 20, 1)).cumsum(axis=1) * np.sqrt(1 / 20)],
        axis=1,
    )
    assets = bs_path(paths, params, T=1.0)
    t = np.linspace(0, 1, 21)
    for m in range(3):
        direct = np.exp((0.01 - 0.5 * 0.04) * t + 0.2 * paths[m, :, 0])
        np.testing.assert_allclose(assets[m, :, 0], direct, rtol=1e-14)


def test_bs_path_tiny_volatility_is_deterministic():
    params = BlackScholesParams(s0=2.0, r=0.0, mu=0.05, sigma=1e-12)
    rng = np.random.default_rng(8)
    paths = rng.normal(size=(2, 4, 1))
    assets = bs_path(paths, params, T=1.0)
    t = np.linspace(0, 1, 4)
    for m in range(2):
        np.testing.assert_allclose(assets[m, :, 0], 2.0 * np.exp(0.05 * t), rtol=1e-9)


def test_market_params_validation():
    with pytest.raises(ConfigurationError):
        BlackScholesParams(s0=1.0, r=0.0, mu=0.0, sigma=0.0)
    with pytest.raises(ConfigurationError):
        BlackScholesParams(s0=1.0, r=0.05, mu=0.05, sigma=0.2, R=0.01)
    with pytest.raises(ConfigurationError):
        BlackScholesParams(s0=[1.0, 2.0], r=0.0, mu=0.0, sigma=[0.2])


# --- drivers -----------------------------------------------------------------


def test_cos_driver_values():
    y = np.array([0.0, np.pi, np.pi / 2])
    vals = driver_cos(0.3, y, None)
    assert vals[0] == 1.0 and vals[1] == -1.0 and abs(vals[2]) <= 1e-15


def make_basket_spec(d=5, rho=0.1, r=0.02, mu=0.05, sigma=0.2):
    params = BlackScholesParams(
        s0=np.full(d, 100.0), r=r, mu=np.full(d, mu), sigma=np.full(d, sigma), R=0.1
    )
    corr = CorrelationSpec(rho=rho, d=d)
    return BasketDriverSpec.from_market(params, corr)


def test_basket_spec_inverse():
    spec = make_basket_spec()
    assert np.abs(spec.sigma_matrix @ spec.inverse - np.eye(5)).max() <= 1e-10


def test_borrowing_driver_zero_point():
    spec = make_basket_spec()
    y = np.zeros(3)
    z = np.zeros((3, 5))
    np.testing.assert_array_equal(driver_borrowing(0.1, y, z, spec, 0.02, 0.1), 0.0)


def test_borrowing_driver_linear_when_hedge_covered():
    spec = make_basket_spec()
    rng = np.random.default_rng(17)
    z = rng.normal(size=(6, 5))
    hedge = z @ spec.hedge_weights
    y = hedge + np.abs(rng.normal(size=6))  # y >= hedge sum: kink inactive
    vals = driver_borrowing(0.0, y, z, spec, 0.02, 0.1)
    linear = -0.02 * y - z @ spec.theta
    np.testing.assert_allclose(vals, linear, rtol=1e-12, atol=1e-12)


def test_borrowing_driver_equal_rates_is_linear():
    spec = make_basket_spec()
    rng = np.random.default_rng(18)
    z = rng.normal(size=(8, 5))
    y = rng.normal(size=8)
    vals = driver_borrowing(0.0, y, z, spec, 0.02, 0.02)
    np.testing.assert_allclose(vals, -0.02 * y - z @ spec.theta, rtol=1e-12, atol=1e-12)


def test_borrowing_driver_convex_kink():
    spec = make_basket_spec()
    z = np.zeros((1, 5))
    below = driver_borrowing(0.0, np.array([-1.0]), z, spec, 0.02, 0.1)[0]
    # with z = 0 and y < 0 the borrowing penalty (R - r) * (-y) is active
    assert below == pytest.approx(0.02 + 0.08, rel=1e-12)


# --- registry ----------------------------------------------------------------


def test_registry_names():
    assert problem_names() == [
        "barrier_call",
        "basket_put",
        "cos_sup",
        "linear_test",
        "martingale_test",
    ]


def test_registry_builds_setups():
    for name in problem_names():
        setup = get_problem(name)
        assert setup.problem.d >= 1
        if name == "basket_put":
            assert setup.correlation is not None
        else:
            assert setup.correlation is None


def test_unknown_problem_and_parameter():
    with pytest.raises(ConfigurationError, match="unknown problem"):
        get_problem("nope")
    with pytest.raises(ConfigurationError, match="unknown parameter"):
        get_problem("barrier_call", {"knock": 1.0})


def test_custom_problem_registration():
    def builder(params):
        setup = get_problem("martingale_test")
        return ProblemSetup(problem=setup.problem, correlation=None, params=params)

    register_problem("custom_for_test", builder)
    try:
        setup = get_problem("custom_for_test", {"whatever": 1})
        assert setup.problem.d == 1
        with pytest.raises(ConfigurationError, match="already registered"):
            register_problem("custom_for_test", builder)
    finally:
        from chaosbsde import problems

        problems._REGISTRY.pop("custom_for_test")


def test_basket_terminal_uses_trend_not_rate():
    setup = get_problem("basket_put")
    paths = np.zeros((1, 21, 5))
    xi = setup.problem.terminal(paths)
    # zero noise: S_T = S0 * exp((mu - sigma^2/2) T) with mu = 0.05
    s_term = 100.0 * np.exp(0.05 - 0.5 * 0.04)
    assert xi[0] == pytest.approx(max(95.0 - s_term, 0.0), rel=1e-12)

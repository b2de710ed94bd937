"""Acceptance suite.

Every test prints one PASS/FAIL line (run with -s to stream them) and
asserts its stated tolerance.  The heavyweight solves are shared through
module-scoped fixtures; each criterion also pins a wall-clock budget.
"""

import math
import os
import time

import numpy as np
import pytest

import chaosbsde as cb

SEED = 20260810
VARLAW_SEED = 0


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def timed_solve(problem, config):
    t0 = time.perf_counter()
    state = cb.solve(problem, config)
    return state, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cos_p2():
    setup = cb.get_problem("cos_sup")
    return timed_solve(
        setup.problem, cb.SolverConfig(p=2, N=20, M=100_000, K_it=6, seed=SEED)
    )


@pytest.fixture(scope="module")
def cos_p3():
    setup = cb.get_problem("cos_sup")
    return timed_solve(
        setup.problem, cb.SolverConfig(p=3, N=20, M=100_000, K_it=6, seed=SEED)
    )


@pytest.fixture(scope="module")
def barrier_run():
    setup = cb.get_problem("barrier_call")
    return timed_solve(
        setup.problem, cb.SolverConfig(p=2, N=20, M=1_000_000, K_it=5, seed=SEED)
    )


@pytest.fixture(scope="module")
def basket_run():
    setup = cb.get_problem("basket_put", {"R": 0.02})
    state, seconds = timed_solve(
        setup.problem,
        cb.SolverConfig(
            p=2, N=20, M=50_000, K_it=5, seed=SEED, correlation=setup.correlation
        ),
    )
    return setup, state, seconds


def geometric_decay(y0_trace, floor_rel=1e-7):
    """Differences |Y0(q) - Y0(q-1)| are nonincreasing for q >= 3 up to 10%
    slack; differences below a relative floor count as converged."""
    diffs = np.abs(np.diff(y0_trace))
    floor = floor_rel * max(1.0, abs(y0_trace[-1]))
    for q in range(2, len(diffs)):  # diffs[q] = |Y0(q+2) - Y0(q+1)|, first is q=3->4
        if diffs[q] <= floor and diffs[q - 1] <= floor:
            continue
        if diffs[q] > 1.1 * diffs[q - 1]:
            return False, f"|dY0| grew at q={q + 2}: {diffs[q - 1]:.3e} -> {diffs[q]:.3e}"
    return True, "trace differences nonincreasing after q=3"


def test_criterion_1_cos_sup_benchmark(cos_p2):
    state, seconds = cos_p2
    y0, z0 = state.Y0, float(state.Z0[0])
    ok = 1.174 <= y0 <= 1.214 and 0.449 <= z0 <= 0.489 and seconds <= 60.0
    report(
        1,
        ok,
        f"cos_sup p=2: Y0={y0:.6f} in [1.174, 1.214], Z0={z0:.6f} in [0.449, 0.489], "
        f"{seconds:.1f}s <= 60s",
    )
    decay_ok, detail = geometric_decay(state.y0_trace)
    assert decay_ok, detail


def test_criterion_2_p_robustness(cos_p2, cos_p3):
    state2, _ = cos_p2
    state3, seconds = cos_p3
    dy = abs(state3.Y0 - state2.Y0) / abs(state2.Y0)
    dz = abs(float(state3.Z0[0]) - float(state2.Z0[0])) / abs(float(state2.Z0[0]))
    ok = dy <= 0.005 and dz <= 0.015 and seconds <= 900.0
    report(
        2,
        ok,
        f"p=3 vs p=2 (same seed): |dY0|/Y0={dy:.4%} <= 0.5%, |dZ0|/Z0={dz:.4%} <= 1.5%, "
        f"{seconds:.0f}s <= 900s",
    )


def test_criterion_3_barrier_benchmark(barrier_run):
    state, seconds = barrier_run
    y0 = state.Y0
    delta0 = float(state.Z0[0]) / (0.2 * 1.0)
    y_err = abs(y0 - 0.134267)
    d_err = abs(delta0 - 0.8327) / 0.8327
    ok = y_err <= 2e-3 and d_err <= 0.02 and seconds <= 600.0
    report(
        3,
        ok,
        f"barrier M=1e6: |Y0-0.134267|={y_err:.2e} <= 2e-3, "
        f"|delta0-0.8327|/0.8327={d_err:.3%} <= 2%, {seconds:.0f}s <= 600s",
    )
    decay_ok, detail = geometric_decay(state.y0_trace)
    assert decay_ok, detail


def test_criterion_4_linear_closed_form():
    setup = cb.get_problem("linear_test")
    state, seconds = timed_solve(
        setup.problem, cb.SolverConfig(p=1, N=20, M=100_000, K_it=8, seed=SEED)
    )
    err = abs(state.Y0 - math.exp(-0.05))
    ok = err <= 0.01 and seconds <= 30.0
    report(4, ok, f"linear: |Y0-exp(-0.05)|={err:.2e} <= 0.01, {seconds:.1f}s <= 30s")


def test_criterion_5_martingale():
    setup = cb.get_problem("martingale_test")
    config = cb.SolverConfig(p=1, N=20, M=100_000, K_it=2, seed=SEED)
    state, seconds = timed_solve(setup.problem, config)
    paths = cb.brownian_paths(cb.sample_panel(config.M, config.basis(1), SEED))
    y_err = float(np.abs(state.y - paths[:, :, 0]).mean())
    z_err = float(np.abs(state.z - 1.0).mean())
    ok = y_err <= 0.05 and z_err <= 0.05 and seconds <= 30.0
    report(
        5,
        ok,
        f"martingale: mean|Y-B|={y_err:.4f} <= 0.05, mean|Z-1|={z_err:.4f} <= 0.05, "
        f"{seconds:.1f}s <= 30s",
    )


def test_criterion_6_basket_linear_reduction(basket_run):
    setup, state, seconds = basket_run
    p = setup.params
    d = int(p["d"])
    market = cb.BlackScholesParams(
        s0=[p["S0"]] * d, r=p["r"], mu=[p["mu"]] * d, sigma=[p["sigma"]] * d
    )
    ref = cb.basket_put_linear_mc(
        market, K=p["K"], rho=p["rho"], T=p["T"], M_ref=2_000_000, seed=SEED
    )
    # solver Monte Carlo half-width from the terminal payoff spread
    config_m = 50_000
    panel = cb.sample_panel(config_m, cb.ChaosBasisSpec(T=1.0, N=20, d=d, p=2), SEED)
    xi = setup.problem.terminal(cb.brownian_paths(cb.correlate(panel, setup.correlation)))
    solver_hw = cb.oracle.Z_99 * float(xi.std()) / math.sqrt(config_m)
    err = abs(state.Y0 - ref.value)
    band = 3.0 * (ref.half_width + solver_hw)
    ok = err <= band and seconds <= 600.0
    report(
        6,
        ok,
        f"basket R=r: |Y0-oracle|={err:.4f} <= 3*(hw_o+hw_s)={band:.4f} "
        f"(oracle {ref.value:.4f}+-{ref.half_width:.4f}), {seconds:.0f}s <= 600s",
    )
    decay_ok, detail = geometric_decay(state.y0_trace)
    assert decay_ok, detail


def test_criterion_7_variance_law():
    t0 = time.perf_counter()
    setup = cb.get_problem("barrier_call")
    basis = cb.ChaosBasisSpec(T=1.0, N=20, d=1, p=2)
    universe = cb.enumerate_universe(basis)
    estimates = {2000: [], 4000: []}
    for rep in range(50):
        for M in (2000, 4000):
            panel = cb.sample_panel(
                M, basis, cb.derive_seed(VARLAW_SEED, "varlaw", rep), check=False
            )
            xi = setup.problem.terminal(cb.brownian_paths(panel))
            estimates[M].append(cb.estimate_coefficients(xi, panel, universe).d0)
    ratio = float(np.var(estimates[2000], ddof=1) / np.var(estimates[4000], ddof=1))
    seconds = time.perf_counter() - t0
    ok = 1.6 <= ratio <= 2.5 and seconds <= 120.0
    report(
        7,
        ok,
        f"variance law: var(M=2000)/var(M=4000)={ratio:.3f} in [1.6, 2.5] over 50 "
        f"replications, {seconds:.0f}s <= 120s",
    )


# --- criterion 8: property suites with zero statistical tolerance -----------


def test_criterion_8a_hermite_properties():
    eps = 1e-5
    ok = True
    for x in np.linspace(-5.0, 5.0, 41):
        values = cb.hermite_eval_all(12, x)
        ok &= values[0] == 1.0
        for k in range(1, 12):
            rhs = x * values[k] - values[k - 1]
            ok &= abs((k + 1) * values[k + 1] - rhs) <= 1e-12 * max(1.0, abs(rhs))
        for n in range(1, 13):
            fd = (cb.hermite_eval(n, x + eps) - cb.hermite_eval(n, x - eps)) / (2 * eps)
            ok &= abs(fd - cb.hermite_eval(n - 1, x)) <= 10 * eps**2
    nodes, weights = np.polynomial.hermite_e.hermegauss(64)
    weights = weights / weights.sum()
    tables = np.array([cb.hermite_eval_all(8, x) for x in nodes])
    for n in range(9):
        for m in range(9):
            ref = 1.0 / math.factorial(n) if n == m else 0.0
            ok &= abs(float((weights * tables[:, n] * tables[:, m]).sum()) - ref) <= 1e-10
    report(8, ok, "hermite recurrence, derivative identity (10*eps^2), orthogonality (1e-10)")


def test_criterion_8b_multiindex_properties():
    from math import comb

    ok = True
    for d in (1, 2, 5):
        for N in (5, 10, 20):
            for p in (1, 2, 3):
                if N < d * p:
                    continue
                uni = cb.enumerate_universe(cb.ChaosBasisSpec(T=1.0, N=N, d=d, p=p))
                expected = sum(comb(d * N + k - 1, k) for k in range(1, p + 1))
                ok &= len(uni) == expected
                step = max(1, len(uni) // 500)
                ok &= all(
                    uni.rank(uni.unrank(r)) == r for r in range(0, len(uni), step)
                )
    report(8, ok, "multi-index count formula and rank/unrank bijection")


def test_criterion_8c_polynomial_exactness():
    basis = cb.ChaosBasisSpec(T=1.0, N=4, d=1, p=2)
    uni = cb.enumerate_universe(basis)
    panel = cb.sample_panel(500, basis, SEED)
    vec = np.zeros(len(uni))
    vec[uni.rank(cb.MultiIndex(np.array([[2, 0, 0, 0]])))] = 2.0
    coeffs = cb.ChaosCoefficients(d0=1.0, coeffs=vec, universe=uni)
    worst = max(
        abs(cb.evaluate_chaos(coeffs, panel, m) - panel.g[m, 0, 0] ** 2)
        for m in range(panel.M)
    )
    report(8, worst <= 1e-12, f"chaos reconstruction of a squared increment: {worst:.2e} <= 1e-12")


def test_criterion_8d_grid_intra_consistency():
    basis = cb.ChaosBasisSpec(T=1.0, N=5, d=2, p=2)
    uni = cb.enumerate_universe(basis)
    panel = cb.sample_panel(300, basis, SEED)
    F = panel.g[:, 0, 0] ** 2 + panel.g[:, 2, 1] * panel.g[:, 4, 0]
    coeffs = cb.estimate_coefficients(F, panel, uni)
    sqrt_h = math.sqrt(basis.h)
    worst = 0.0
    for m in (0, 100, 299):
        for r in range(1, 6):
            w = sqrt_h * panel.g[m, r - 1]
            e_grid = cb.conditional_expectation_grid(coeffs, panel, m, r)
            e_intra = cb.conditional_expectation_intra(coeffs, panel, m, r * basis.h, w)
            worst = max(worst, abs(e_intra - e_grid) / max(1.0, abs(e_grid)))
            for l in (1, 2):
                d_grid = cb.malliavin_derivative_grid(coeffs, panel, m, r, l)
                d_intra = cb.malliavin_derivative_intra(coeffs, panel, m, r * basis.h, w, l)
                worst = max(worst, abs(d_intra - d_grid) / max(1.0, abs(d_grid)))
    report(8, worst <= 1e-12, f"grid vs intra-grid at grid times: {worst:.2e} <= 1e-12")


def test_criterion_8e_thread_bitwise_determinism():
    setup = cb.get_problem("cos_sup")
    base = dict(p=2, N=10, M=20_000, K_it=3, seed=SEED)
    single = cb.solve(setup.problem, cb.SolverConfig(**base, threads=1))
    many = cb.solve(
        setup.problem, cb.SolverConfig(**base, threads=max(os.cpu_count() or 1, 4))
    )
    ok = (
        single.y.tobytes() == many.y.tobytes()
        and single.z.tobytes() == many.z.tobytes()
        and single.y0_trace == many.y0_trace
        and all((a == b).all() for a, b in zip(single.z0_trace, many.z0_trace))
    )
    report(8, ok, "solve is bitwise identical with 1 worker and all cores")

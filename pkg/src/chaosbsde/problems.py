"""Benchmark problem instances and the named problem registry.

Every entry maps a flat parameter dict to a ProblemSetup: the driver and
terminal functional, plus the correlation structure when the assets are
driven by correlated Brownian components.  Terminal functionals consume the
grid Brownian paths produced by the solver, composing the Black-Scholes map
where needed.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .brownian import CorrelationSpec
from .errors import ConfigurationError
from .solver import BSDEProblem


@dataclass(frozen=True)
class BlackScholesParams:
    """Market parameters of one or several lognormal assets.

    s0, mu, sigma hold one entry per asset; r is the bond rate and R the
    borrowing rate (only meaningful for the basket problem, where it must
    not be below r).
    """

    s0: np.ndarray
    r: float
    mu: np.ndarray
    sigma: np.ndarray
    R: Optional[float] = None

    def __post_init__(self):
        for name in ("s0", "mu", "sigma"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            )
        if not (self.sigma > 0).all():
            raise ConfigurationError("volatilities must be positive")
        if not (self.s0.shape == self.mu.shape == self.sigma.shape):
            raise ConfigurationError("s0, mu, sigma must have one entry per asset")
        if self.R is not None and self.R < self.r:
            raise ConfigurationError(
                f"borrowing rate {self.R} must not be below the bond rate {self.r}"
            )

    @property
    def n_assets(self) -> int:
        return self.s0.shape[0]


def bs_path(paths: np.ndarray, params: BlackScholesParams, T: float) -> np.ndarray:
    """Lognormal asset grid values from Brownian grid values.

    paths has shape (M, N+1, d) (use the correlated panel when rho != 0);
    the result has the same shape, with S^i_t = s0_i * exp((mu_i -
    sigma_i^2/2) t + sigma_i B^i_t) evaluated at every grid node.
    """
    n_steps = paths.shape[1] - 1
    t = np.linspace(0.0, T, n_steps + 1)
    drift = (params.mu - 0.5 * params.sigma**2)[None, None, :] * t[None, :, None]
    return params.s0[None, None, :] * np.exp(drift + params.sigma[None, None, :] * paths)


def terminal_sup_bm(paths: np.ndarray) -> np.ndarray:
    """Maximum of the first Brownian component over the grid nodes t_1..t_N.

    The path maximum is proxied by the N node values reconstructed from the
    increments; the deterministic zero node never enters, so the value is
    negative on paths that stay below zero.
    """
    return paths[:, 1:, 0].max(axis=1)


def terminal_barrier_call(assets: np.ndarray, strike: float, barrier: float) -> np.ndarray:
    """Down-and-out call payoff monitored at every grid node."""
    s = assets[:, :, 0]
    alive = s.min(axis=1) >= barrier
    return np.maximum(s[:, -1] - strike, 0.0) * alive


def terminal_basket_put(assets: np.ndarray, strike: float) -> np.ndarray:
    """Put on the equally weighted basket of terminal asset values."""
    return np.maximum(strike - assets[:, -1, :].mean(axis=1), 0.0)


def driver_cos(t, y, z):
    return np.cos(y)


@dataclass(frozen=True)
class BasketDriverSpec:
    """Precomputed market quantities of the borrowing-rate basket driver.

    sigma_matrix rows give each asset's exposure to the independent Brownian
    components (volatility times the correlation factor); theta solves
    sigma_matrix @ theta = mu - r; hedge_weights turns a z-vector into the
    summed hedge positions sum_i (sigma_matrix^{-1} z)_i.
    """

    theta: np.ndarray
    sigma_matrix: np.ndarray
    inverse: np.ndarray
    hedge_weights: np.ndarray

    @classmethod
    def from_market(cls, params: BlackScholesParams, corr: CorrelationSpec):
        mat = params.sigma[:, None] * corr.lower
        try:
            inv = np.linalg.inv(mat)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError(f"volatility matrix is singular: {exc}")
        if np.abs(mat @ inv - np.eye(len(mat))).max() > 1e-10:
            raise ConfigurationError("volatility matrix too ill-conditioned to invert")
        ones = np.ones(len(mat))
        return cls(
            theta=inv @ (params.mu - params.r * ones),
            sigma_matrix=mat,
            inverse=inv,
            hedge_weights=inv.T @ ones,
        )


def driver_borrowing(t, y, z, spec: BasketDriverSpec, r: float, R: float):
    """Nonlinear pricing driver with distinct lending/borrowing rates."""
    shortfall = z @ spec.hedge_weights - y
    return -r * y - z @ spec.theta + (R - r) * np.maximum(shortfall, 0.0)


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ProblemSetup:
    problem: BSDEProblem
    correlation: Optional[CorrelationSpec]
    params: dict


def _take(params: dict, name: str, defaults: dict) -> dict:
    merged = dict(defaults)
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigurationError(
            f"unknown parameter(s) {sorted(unknown)} for problem {name!r}; "
            f"valid keys: {sorted(defaults)}"
        )
    merged.update(params)
    return merged


def _build_cos_sup(params: dict) -> ProblemSetup:
    p = _take(params, "cos_sup", {})
    problem = BSDEProblem(driver=driver_cos, terminal=terminal_sup_bm, d=1)
    return ProblemSetup(problem=problem, correlation=None, params=p)


def _build_barrier_call(params: dict) -> ProblemSetup:
    p = _take(
        params,
        "barrier_call",
        {"r": 0.01, "sigma": 0.2, "S0": 1.0, "K": 0.9, "L": 0.85, "T": 1.0},
    )
    market = BlackScholesParams(s0=p["S0"], r=p["r"], mu=p["r"], sigma=p["sigma"])

    def terminal(paths):
        return terminal_barrier_call(bs_path(paths, market, p["T"]), p["K"], p["L"])

    def driver(t, y, z):
        return -p["r"] * y

    problem = BSDEProblem(driver=driver, terminal=terminal, d=1)
    return ProblemSetup(problem=problem, correlation=None, params=p)


def _build_basket_put(params: dict) -> ProblemSetup:
    p = _take(
        params,
        "basket_put",
        {
            "d": 5,
            "r": 0.02,
            "R": 0.1,
            "K": 95.0,
            "rho": 0.1,
            "S0": 100.0,
            "mu": 0.05,
            "sigma": 0.2,
            "T": 1.0,
        },
    )
    d = int(p["d"])
    ones = np.ones(d)
    market = BlackScholesParams(
        s0=p["S0"] * ones, r=p["r"], mu=p["mu"] * ones, sigma=p["sigma"] * ones, R=p["R"]
    )
    corr = CorrelationSpec(rho=p["rho"], d=d)
    spec = BasketDriverSpec.from_market(market, corr)

    def terminal(paths):
        return terminal_basket_put(bs_path(paths, market, p["T"]), p["K"])

    def driver(t, y, z):
        return driver_borrowing(t, y, z, spec, p["r"], p["R"])

    problem = BSDEProblem(driver=driver, terminal=terminal, d=d)
    return ProblemSetup(problem=problem, correlation=corr, params=p)


def _build_linear_test(params: dict) -> ProblemSetup:
    p = _take(params, "linear_test", {"r": 0.05, "c": 1.0})

    def terminal(paths):
        return np.full(paths.shape[0], p["c"])

    def driver(t, y, z):
        return -p["r"] * y

    problem = BSDEProblem(driver=driver, terminal=terminal, d=1)
    return ProblemSetup(problem=problem, correlation=None, params=p)


def _build_martingale_test(params: dict) -> ProblemSetup:
    p = _take(params, "martingale_test", {})

    def terminal(paths):
        return paths[:, -1, 0]

    def driver(t, y, z):
        return np.zeros_like(y)

    problem = BSDEProblem(driver=driver, terminal=terminal, d=1)
    return ProblemSetup(problem=problem, correlation=None, params=p)


_REGISTRY: dict = {
    "cos_sup": _build_cos_sup,
    "barrier_call": _build_barrier_call,
    "basket_put": _build_basket_put,
    "linear_test": _build_linear_test,
    "martingale_test": _build_martingale_test,
}


def problem_names() -> list:
    return sorted(_REGISTRY)


def register_problem(name: str, builder: Callable[[dict], ProblemSetup]) -> None:
    """Register a custom problem builder under a new name."""
    if name in _REGISTRY:
        raise ConfigurationError(f"problem {name!r} is already registered")
    _REGISTRY[name] = builder


def get_problem(name: str, params: Optional[dict] = None) -> ProblemSetup:
    """Instantiate a registered problem from its parameter dict."""
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; available: {', '.join(problem_names())}"
        ) from None
    return builder(dict(params or {}))

"""Independent reference values: closed forms and plain Monte Carlo pricers.

These never touch the chaos machinery; they exist to validate it.  The
Monte Carlo oracles use antithetic pairs under the risk-neutral drift and
report two-sided 99% confidence half-widths.  Oracle random streams are
namespaced away from solver seeds, so passing the same base seed to both
never couples them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .brownian import CorrelationSpec
from .errors import ConfigurationError
from .problems import BlackScholesParams
from .seeds import derive_seed

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile
_PAIR_BLOCK = 1 << 16


@dataclass(frozen=True)
class ReferenceValue:
    """A benchmark number with its 99% confidence half-width."""

    value: float
    half_width: float
    method: str

    def __post_init__(self):
        if self.half_width < 0:
            raise ConfigurationError("half-width must be nonnegative")

    def compatible(self, other: float, extra_half_width: float = 0.0, n_widths: float = 3.0) -> bool:
        """Whether `other` lies within n combined half-widths of the value."""
        return abs(other - self.value) <= n_widths * (self.half_width + extra_half_width)


def linear_bsde_closed_form(r: float, T: float, c: float = 1.0) -> ReferenceValue:
    """Exact value c * exp(-r T) of the linear problem with constant terminal."""
    return ReferenceValue(value=c * math.exp(-r * T), half_width=0.0, method="closed-form")


def _mc_mean(pair_fn, n_pairs: int, rng) -> ReferenceValue:
    """Blocked antithetic Monte Carlo with a deterministic reduction order."""
    sums, sqsums = [], []
    done = 0
    while done < n_pairs:
        count = min(_PAIR_BLOCK, n_pairs - done)
        vals = pair_fn(count, rng)
        sums.append(float(vals.sum()))
        sqsums.append(float((vals * vals).sum()))
        done += count
    total = math.fsum(sums)
    sq_total = math.fsum(sqsums)
    mean = total / n_pairs
    var = max(sq_total / n_pairs - mean * mean, 0.0)
    half = Z_99 * math.sqrt(var / n_pairs)
    return ReferenceValue(value=mean, half_width=half, method="plain-mc")


def barrier_call_mc(
    params: BlackScholesParams,
    K: float,
    L: float,
    T: float,
    N: int,
    M_ref: int,
    seed: int,
) -> ReferenceValue:
    """Plain risk-neutral Monte Carlo price of the discrete down-and-out call.

    Simulates N-step lognormal paths with drift r, knocks out whenever any
    of the N+1 grid values falls below L, discounts at r, and averages over
    antithetic pairs.
    """
    if M_ref < 10_000:
        raise ConfigurationError(f"reference run needs M_ref >= 10000, got {M_ref}")
    if params.n_assets != 1:
        raise ConfigurationError("barrier oracle prices a single asset")
    rng = np.random.default_rng(derive_seed(seed, "oracle", "barrier_call"))
    h = T / N
    s0 = float(params.s0[0])
    sigma = float(params.sigma[0])
    r = params.r
    step_drift = (r - 0.5 * sigma * sigma) * h
    disc = math.exp(-r * T)

    def leg(g):
        log_s = np.cumsum(step_drift + sigma * math.sqrt(h) * g, axis=1)
        s = s0 * np.exp(log_s)
        alive = (s.min(axis=1) >= L) & (s0 >= L)
        return np.maximum(s[:, -1] - K, 0.0) * alive

    def pair_values(count, rng):
        g = rng.standard_normal((count, N))
        return disc * 0.5 * (leg(g) + leg(-g))

    return _mc_mean(pair_values, max(M_ref // 2, 1), rng)


def basket_put_linear_mc(
    params: BlackScholesParams,
    K: float,
    rho: float,
    T: float,
    M_ref: int,
    seed: int,
) -> ReferenceValue:
    """Plain risk-neutral Monte Carlo price of the European basket put.

    The payoff only involves the terminal values, so the correlated terminal
    Brownian vector is sampled exactly; drift is the bond rate r regardless
    of the trend parameter.
    """
    if M_ref < 10_000:
        raise ConfigurationError(f"reference run needs M_ref >= 10000, got {M_ref}")
    d = params.n_assets
    corr = CorrelationSpec(rho=rho, d=d)
    rng = np.random.default_rng(derive_seed(seed, "oracle", "basket_put"))
    drift = (params.r - 0.5 * params.sigma**2) * T
    scale = params.sigma * math.sqrt(T)
    disc = math.exp(-params.r * T)
    lower_t = corr.lower.T

    def leg(g):
        s_term = params.s0 * np.exp(drift + scale * (g @ lower_t))
        return np.maximum(K - s_term.mean(axis=1), 0.0)

    def pair_values(count, rng):
        g = rng.standard_normal((count, d))
        return disc * 0.5 * (leg(g) + leg(-g))

    return _mc_mean(pair_values, max(M_ref // 2, 1), rng)

"""Normalized Hermite polynomials.

K_n is the Hermite polynomial normalized so that

    exp(x*t - t**2/2) = sum_{n>=0} K_n(x) * t**n,

i.e. K_n = He_n / n! for the probabilists' polynomial He_n, with K_{-1} = 0.
With this normalization K_n' = K_{n-1} and the Gaussian L2 norm of K_n is
1/sqrt(n!).  Everything is evaluated through the stable recurrence

    (k+1) K_{k+1}(x) = x K_k(x) - K_{k-1}(x),

so no factorial is ever formed and magnitudes stay bounded for moderate x.
"""

import math

import numpy as np


def hermite_eval(n: int, x: float) -> float:
    """Evaluate K_n(x).

    Parameters
    ----------
    n : int
        Polynomial order, n >= 0.
    x : float
        Evaluation point; must be finite.
    """
    if n < 0:
        raise ValueError(f"order must be nonnegative, got n={n}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"evaluation point must be finite, got x={x}")
    km1, k0 = 0.0, 1.0
    for k in range(n):
        km1, k0 = k0, (x * k0 - km1) / (k + 1)
    return k0


def hermite_eval_all(n_max: int, x: float) -> np.ndarray:
    """Evaluate K_0(x) .. K_{n_max}(x) in one recurrence pass.

    Returns an array of length n_max + 1 with values[k] == hermite_eval(k, x)
    exactly (same recurrence, same rounding).
    """
    if n_max < 0:
        raise ValueError(f"order must be nonnegative, got n_max={n_max}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"evaluation point must be finite, got x={x}")
    values = np.empty(n_max + 1)
    values[0] = 1.0
    if n_max >= 1:
        values[1] = x
    for k in range(1, n_max):
        values[k + 1] = (x * values[k] - values[k - 1]) / (k + 1)
    return values


def hermite_table(x: np.ndarray, n_max: int) -> np.ndarray:
    """K_0..K_{n_max} for an array of points, stacked along a new last axis.

    The returned array has shape x.shape + (n_max + 1,); entry [..., k]
    holds K_k applied elementwise.  Used to tabulate Hermite values of all
    standardized increments of a sample in one shot.
    """
    if n_max < 0:
        raise ValueError(f"order must be nonnegative, got n_max={n_max}")
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("evaluation points must be finite")
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = x
    for k in range(1, n_max):
        np.multiply(x, out[..., k], out=out[..., k + 1])
        out[..., k + 1] -= out[..., k - 1]
        out[..., k + 1] /= k + 1
    return out

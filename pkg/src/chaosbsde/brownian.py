"""Standardized Brownian increment panels.

A panel holds the M x N x d matrix of standardized increments
G[m, i, j] = (B_{t_{i+1}} - B_{t_i}) / sqrt(h) for sample m, drawn once per
solve and shared (read-only) by coefficient estimation and evaluation.
Generation uses numpy's PCG64 generator seeded from the panel seed, so a
panel is fully determined by (M, N, d, T, seed); the normal draws fill the
array row-major, which makes panels with the same seed prefix-compatible
in M.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import ChaosBasisSpec
from .errors import ConfigurationError, DataError, ResourceLimitError

_MASK64 = (1 << 64) - 1
DEFAULT_MAX_PANEL_BYTES = 4 << 30

_HEADER = struct.Struct("<4sqqqdQ")
_MAGIC = b"GPN1"


@dataclass(frozen=True)
class SamplePanel:
    """Immutable panel of standardized increments plus its grid geometry."""

    g: np.ndarray  # (M, N, d)
    h: float
    T: float
    seed: int

    def __post_init__(self):
        if self.g.ndim != 3:
            raise DataError(f"panel array must be (M, N, d), got shape {self.g.shape}")

    @property
    def M(self) -> int:
        return self.g.shape[0]

    @property
    def N(self) -> int:
        return self.g.shape[1]

    @property
    def d(self) -> int:
        return self.g.shape[2]


def sample_panel(
    M: int,
    basis: ChaosBasisSpec,
    seed: int,
    *,
    max_bytes: int = DEFAULT_MAX_PANEL_BYTES,
    check: bool = True,
) -> SamplePanel:
    """Draw an M-sample panel of independent standard normal increments.

    The panel is bitwise reproducible from (M, N, d, T, seed).  When check
    is true, slot means and variances outside their 5-sigma concentration
    bands trigger a warning (never an error): band 5/sqrt(M) around 0 for
    means, 5*sqrt(2/M) around 1 for variances.
    """
    if M < 1:
        raise ConfigurationError(f"sample count must be >= 1, got M={M}")
    nbytes = 8 * M * basis.N * basis.d
    if nbytes > max_bytes:
        raise ResourceLimitError(
            f"panel of {nbytes} bytes exceeds the cap of {max_bytes} bytes"
        )
    rng = np.random.default_rng(seed & _MASK64)
    g = rng.standard_normal((M, basis.N, basis.d))
    g.flags.writeable = False
    panel = SamplePanel(g=g, h=basis.h, T=basis.T, seed=seed)
    if check and M >= 2:
        means = g.mean(axis=0)
        variances = g.var(axis=0)
        mean_band = 5.0 / np.sqrt(M)
        var_band = 5.0 * np.sqrt(2.0 / M)
        bad_mean = int((np.abs(means) > mean_band).sum())
        bad_var = int((np.abs(variances - 1.0) > var_band).sum())
        if bad_mean or bad_var:
            warnings.warn(
                f"panel sanity gate: {bad_mean} slot means outside +-{mean_band:.3g}, "
                f"{bad_var} slot variances outside 1+-{var_band:.3g} (seed {seed})",
                RuntimeWarning,
                stacklevel=2,
            )
    return panel


def brownian_paths(panel: SamplePanel) -> np.ndarray:
    """Grid values of all Brownian paths, shape (M, N+1, d); B at t_0 is 0."""
    M, N, d = panel.g.shape
    paths = np.empty((M, N + 1, d))
    paths[:, 0, :] = 0.0
    np.cumsum(panel.g, axis=1, out=paths[:, 1:, :])
    paths[:, 1:, :] *= np.sqrt(panel.h)
    return paths


def brownian_path(panel: SamplePanel, m: int) -> np.ndarray:
    """Grid values of the Brownian path of sample m, shape (N+1, d)."""
    if not 0 <= m < panel.M:
        raise IndexError(f"sample {m} out of range [0, {panel.M})")
    path = np.empty((panel.N + 1, panel.d))
    path[0] = 0.0
    np.cumsum(panel.g[m], axis=0, out=path[1:])
    path[1:] *= np.sqrt(panel.h)
    return path


@dataclass(frozen=True)
class CorrelationSpec:
    """Constant-correlation structure rho off the diagonal, 1 on it.

    Valid for rho in (-1/(d-1), 1), where the matrix is positive definite.
    The lower-triangular Cholesky factor L (C = L L*) is computed once.
    """

    rho: float
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError(f"dimension must be >= 1, got d={self.d}")
        lower = -1.0 / (self.d - 1) if self.d > 1 else -np.inf
        if not (lower < self.rho < 1.0):
            raise ConfigurationError(
                f"correlation {self.rho} outside ({lower}, 1) for d={self.d}"
            )
        c = self.matrix
        try:
            low = np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError(f"correlation matrix not positive definite: {exc}")
        if np.abs(low @ low.T - c).max() > 1e-12:
            raise ConfigurationError("Cholesky factor does not reproduce the matrix")
        low.flags.writeable = False
        object.__setattr__(self, "_lower", low)

    @property
    def matrix(self) -> np.ndarray:
        return np.full((self.d, self.d), self.rho) + (1.0 - self.rho) * np.eye(self.d)

    @property
    def lower(self) -> np.ndarray:
        """Lower-triangular factor L with L @ L.T equal to the matrix."""
        return self._lower


def correlate(panel: SamplePanel, corr: CorrelationSpec) -> SamplePanel:
    """Apply the correlation factor to every per-slot increment vector.

    Each d-vector g of the panel is replaced by L @ g, so the rescaled
    increments sqrt(h) * g acquire covariance C * h while keeping unit
    marginal variances.  Returns a new immutable panel.
    """
    if corr.d != panel.d:
        raise ConfigurationError(
            f"correlation dimension {corr.d} does not match panel dimension {panel.d}"
        )
    g = panel.g @ corr.lower.T
    g.flags.writeable = False
    return SamplePanel(g=g, h=panel.h, T=panel.T, seed=panel.seed)


def save_panel(panel: SamplePanel, path: str) -> None:
    """Dump a panel to a flat binary file (header + row-major float64 body)."""
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC, panel.M, panel.N, panel.d, panel.T, panel.seed & _MASK64
            )
        )
        fh.write(np.ascontiguousarray(panel.g, dtype="<f8").tobytes())


def load_panel(path: str) -> SamplePanel:
    """Load a panel written by save_panel; bitwise identical to the original."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise DataError(f"truncated panel file {path!r}")
        magic, M, N, d, T, seed = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise DataError(f"not a panel file: {path!r}")
        body = np.fromfile(fh, dtype="<f8", count=M * N * d)
    if body.size != M * N * d:
        raise DataError(f"panel file {path!r} body is incomplete")
    g = body.astype(np.float64).reshape(M, N, d)
    g.flags.writeable = False
    return SamplePanel(g=g, h=T / N, T=T, seed=seed)

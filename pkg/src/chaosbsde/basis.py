"""Specification of the truncated chaos basis."""

from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class ChaosBasisSpec:
    """Time horizon, grid, Brownian dimension and chaos order of one expansion.

    The basis consists of the d*N rescaled step functions on the regular grid
    t_i = i*T/N, one per (component, time step) slot, and the chaos expansion
    keeps products of Hermite polynomials up to total degree p.
    """

    T: float
    N: int
    d: int = 1
    p: int = 1

    def __post_init__(self):
        if not self.T > 0.0:
            raise ConfigurationError(f"horizon T must be positive, got {self.T}")
        if self.N < 1 or self.d < 1 or self.p < 1:
            raise ConfigurationError(
                f"N, d, p must all be >= 1, got N={self.N}, d={self.d}, p={self.p}"
            )
        if self.N < self.d * self.p:
            raise ConfigurationError(
                f"grid too coarse: need N >= d*p, got N={self.N} < {self.d * self.p}"
            )

    @property
    def h(self) -> float:
        """Time step T/N."""
        return self.T / self.N

    @property
    def n_slots(self) -> int:
        """Number of basis slots d*N."""
        return self.d * self.N

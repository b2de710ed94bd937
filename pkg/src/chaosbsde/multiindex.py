"""Enumeration, ranking and weights of chaos multi-indices.

A multi-index assigns a Hermite degree to each of the d*N basis slots; slot
s = j*N + i addresses component j, time step i (both 0-based).  The universe
holds every index with total degree between 1 and p, in a canonical order:
degree-ascending, and within one degree class ordered by the flattened slot
vector with earlier slots carrying larger degrees first, so that

    (d=1, N=2, p=2)  ->  (1,0), (0,1), (2,0), (1,1), (0,2).

The order is deterministic across runs and platforms and defines the layout
of every coefficient vector.
"""

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .basis import ChaosBasisSpec
from .errors import ConfigurationError, ResourceLimitError

DEFAULT_MAX_UNIVERSE = 50_000_000


@dataclass(frozen=True)
class MultiIndex:
    """One chaos multi-index: a d x N array of slot degrees."""

    degrees: np.ndarray  # (d, N) small nonnegative ints
    degree: int = field(init=False)

    def __post_init__(self):
        deg = np.asarray(self.degrees)
        if deg.ndim != 2 or (deg < 0).any():
            raise ValueError("degrees must be a 2-d array of nonnegative integers")
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "degree", int(deg.sum()))

    def key(self) -> bytes:
        """Canonical hashable encoding (component-major flattened degrees)."""
        return self.degrees.astype(np.int16).tobytes()

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and np.array_equal(self.degrees, other.degrees)

    def __hash__(self):
        return hash(self.key())


def factorial_weight(n: MultiIndex) -> int:
    """Product of the factorials of all slot degrees."""
    w = 1
    for deg in n.degrees.ravel():
        if deg > 1:
            w *= factorial(int(deg))
    return w


def universe_size(basis: ChaosBasisSpec) -> int:
    """Number of multi-indices with total degree 1..p over d*N slots."""
    s = basis.n_slots
    return sum(comb(s + k - 1, k) for k in range(1, basis.p + 1))


class IndexUniverse:
    """All multi-indices of a basis, in canonical order, with rank lookup.

    Attributes
    ----------
    basis : ChaosBasisSpec
    flat : (U, d*N) int16 array, one row per index, canonical order.
    degree : (U,) total degrees.
    birth : (U,) 1-based time step of the last slot with positive degree;
        an index only involves increments up to its birth step.
    weights : (U,) float64 factorial weights n!.
    sparse : list of (slots, degs) integer tuples, the nonzero entries per row.
    """

    def __init__(self, basis: ChaosBasisSpec, flat: np.ndarray):
        self.basis = basis
        self.flat = flat
        self.degree = flat.sum(axis=1).astype(np.int64)
        fact = np.array([float(factorial(k)) for k in range(basis.p + 1)])
        self.weights = fact[flat].prod(axis=1)
        step_of_slot = np.arange(basis.n_slots) % basis.N + 1
        self.birth = ((flat > 0) * step_of_slot).max(axis=1).astype(np.int64)
        self.sparse = []
        for row in flat:
            slots = np.flatnonzero(row)
            self.sparse.append(
                (tuple(int(s) for s in slots), tuple(int(c) for c in row[slots]))
            )
        self._rank = {flat[r].tobytes(): r for r in range(len(flat))}
        self._cache: dict = {}

    def __len__(self) -> int:
        return len(self.flat)

    @property
    def size(self) -> int:
        return len(self.flat)

    def rank(self, n: MultiIndex) -> int:
        """Position of a multi-index in the canonical order."""
        key = np.ascontiguousarray(n.degrees, dtype=np.int16).reshape(-1).tobytes()
        try:
            return self._rank[key]
        except KeyError:
            raise KeyError(f"multi-index not in universe (degree {n.degree})") from None

    def unrank(self, r: int) -> MultiIndex:
        """Multi-index stored at rank r."""
        if not 0 <= r < len(self.flat):
            raise IndexError(f"rank {r} out of range [0, {len(self.flat)})")
        return MultiIndex(self.flat[r].reshape(self.basis.d, self.basis.N).astype(np.int64))

    def unit_rank(self, component: int, step: int) -> int:
        """Rank of the degree-1 index at (component, step), both 1-based."""
        if not 1 <= component <= self.basis.d or not 1 <= step <= self.basis.N:
            raise IndexError(f"slot ({component}, {step}) outside {self.basis.d}x{self.basis.N}")
        row = np.zeros(self.basis.n_slots, dtype=np.int16)
        row[(component - 1) * self.basis.N + (step - 1)] = 1
        return self._rank[row.tobytes()]


def _emit_degree_class(k: int, n_slots: int, rows: list, row_template: np.ndarray):
    """Append all degree-k rows in canonical order."""

    def rec(start: int, remaining: int, entries):
        for s in range(start, n_slots):
            for c in range(remaining, 0, -1):
                if c == remaining:
                    row = row_template.copy()
                    for slot, deg in entries:
                        row[slot] = deg
                    row[s] = c
                    rows.append(row)
                else:
                    rec(s + 1, remaining - c, entries + [(s, c)])

    rec(0, k, [])


def enumerate_universe(
    basis: ChaosBasisSpec, max_size: int = DEFAULT_MAX_UNIVERSE
) -> IndexUniverse:
    """Enumerate all multi-indices with total degree 1..p in canonical order.

    Raises ResourceLimitError if the universe would exceed max_size entries
    (checked before any allocation) and ConfigurationError if N < d*p.
    """
    if basis.N < basis.d * basis.p:
        raise ConfigurationError(
            f"need N >= d*p for the chaos formulas, got N={basis.N}, d*p={basis.d * basis.p}"
        )
    total = universe_size(basis)
    if total > max_size:
        raise ResourceLimitError(
            f"universe of {total} multi-indices exceeds the cap of {max_size}; "
            "reduce p or the grid, or raise max_size explicitly"
        )
    n_slots = basis.n_slots
    template = np.zeros(n_slots, dtype=np.int16)
    rows: list = []
    for k in range(1, basis.p + 1):
        _emit_degree_class(k, n_slots, rows, template)
    flat = np.vstack(rows) if rows else np.zeros((0, n_slots), dtype=np.int16)
    assert len(flat) == total
    return IndexUniverse(basis, flat)

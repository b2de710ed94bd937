"""Truncated chaos expansions: coefficient estimation and closed-form fields.

A square-integrable functional F of the Brownian increments is represented
as

    F  ~  d0 + sum_{1<=|n|<=p} d_n * prod_{j,i} K_{n_i^j}(G_i^j),

with d0 = E[F] and d_n = n! E[F prod K_{n_i^j}(G_i^j)].  Once the
coefficients are known, conditional expectations given the first r
increments and their Malliavin derivatives are sums over the sub-family of
multi-indices that only touch slots up to r, evaluated pathwise with no
extra simulation.

Estimation offers two routes: empirical means of the projection formulas
(the default) and a ridge-stabilized least-squares fit on the same product
regressors.  Both are computed in sample blocks whose partial results are
combined by a fixed pairwise tree, so results are bitwise independent of
the number of worker threads.
"""

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import ChaosBasisSpec
from .brownian import SamplePanel
from .errors import (
    ConfigurationError,
    DataError,
    IllConditionedError,
    UnderdeterminedError,
)
from .hermite import hermite_table
from .multiindex import IndexUniverse

DEFAULT_BLOCK_ELEMENTS = 1 << 22
GRAM_CONDITION_LIMIT = 1e12

_COEF_HEADER = struct.Struct("<4sqqqqd")
_COEF_MAGIC = b"CCF1"


@dataclass(frozen=True)
class ChaosCoefficients:
    """Estimated chaos coefficients of one random variable.

    coeffs is dense and aligned with the canonical multi-index order of the
    universe; d0 estimates the plain expectation.
    """

    d0: float
    coeffs: np.ndarray
    universe: IndexUniverse

    def __post_init__(self):
        if self.coeffs.shape != (len(self.universe),):
            raise DataError(
                f"coefficient vector has length {self.coeffs.shape}, "
                f"universe has {len(self.universe)} indices"
            )
        if not (math.isfinite(self.d0) and np.isfinite(self.coeffs).all()):
            raise DataError("chaos coefficients must be finite")

    @property
    def basis(self) -> ChaosBasisSpec:
        return self.universe.basis


# ---------------------------------------------------------------------------
# blocked evaluation machinery


def _blocks(M: int, width: int, block_elements: int):
    size = max(256, min(M, block_elements // max(width, 1)))
    return [(lo, min(lo + size, M)) for lo in range(0, M, size)]


def _run_blocks(fn, blocks, threads):
    if threads <= 1 or len(blocks) == 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=min(threads, len(blocks))) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in blocks]
        return [f.result() for f in futures]


def _pairwise_sum(items):
    # fixed-shape reduction tree: result independent of who computed the parts
    items = list(items)
    while len(items) > 1:
        items = [
            items[i] + items[i + 1] if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


class _ProductSet:
    """Gather plan turning a Hermite table block into product columns."""

    __slots__ = ("ncols", "groups")

    def __init__(self, ncols, groups):
        self.ncols = ncols
        self.groups = groups


def _build_pset(factor_lists, N, d, p):
    by_count = {}
    for col, factors in enumerate(factor_lists):
        by_count.setdefault(len(factors), []).append((col, factors))
    groups = []
    for count in sorted(by_count):
        cols = np.array([c for c, _ in by_count[count]], dtype=np.int64)
        gath = np.empty((len(cols), count), dtype=np.int64)
        for row, (_, factors) in enumerate(by_count[count]):
            for t, (slot, deg) in enumerate(factors):
                i, j = slot % N, slot // N
                gath[row, t] = (i * d + j) * (p + 1) + deg
        groups.append((cols, gath))
    return _ProductSet(len(factor_lists), groups)


def _products(h_flat: np.ndarray, pset: _ProductSet, out: np.ndarray = None):
    if out is None:
        out = np.empty((h_flat.shape[0], pset.ncols))
    for cols, gath in pset.groups:
        if gath.shape[1] == 0:
            out[:, cols] = 1.0
            continue
        tmp = h_flat[:, gath[:, 0]]  # fancy indexing copies, so *= is safe
        for t in range(1, gath.shape[1]):
            tmp *= h_flat[:, gath[:, t]]
        out[:, cols] = tmp
    return out


class _Tables:
    """Per-universe evaluation plan, built once and cached on the universe.

    perm sorts ranks by the birth step so that the indices alive at grid
    point r form the prefix of length alive_counts[r]; deriv[r-1][l-1]
    holds the coefficient ranks and the degree-reduced product plan of the
    indices contributing to the derivative at (r, l).
    """

    __slots__ = ("perm", "alive_counts", "main", "deriv")

    def __init__(self, universe: IndexUniverse):
        basis = universe.basis
        N, d, p = basis.N, basis.d, basis.p
        birth = universe.birth
        self.perm = np.argsort(birth, kind="stable").astype(np.int64)
        self.alive_counts = np.searchsorted(
            birth[self.perm], np.arange(N + 1), side="right"
        )
        self.main = _build_pset(
            [list(zip(*universe.sparse[r])) for r in self.perm], N, d, p
        )
        buckets = [[[] for _ in range(d)] for _ in range(N)]
        for rank, (slots, degs) in enumerate(universe.sparse):
            r = int(birth[rank])
            for slot, deg in zip(slots, degs):
                if slot % N != r - 1:
                    continue
                j = slot // N
                reduced = [(s2, c2) for s2, c2 in zip(slots, degs) if s2 != slot]
                if deg > 1:
                    reduced.append((slot, deg - 1))
                buckets[r - 1][j].append((rank, reduced))
        self.deriv = [[None] * d for _ in range(N)]
        for r0 in range(N):
            for j in range(d):
                if not buckets[r0][j]:
                    continue
                ranks = np.array([rk for rk, _ in buckets[r0][j]], dtype=np.int64)
                pset = _build_pset([fs for _, fs in buckets[r0][j]], N, d, p)
                self.deriv[r0][j] = (ranks, pset)


def _tables(universe: IndexUniverse) -> _Tables:
    tables = universe._cache.get("eval")
    if tables is None:
        tables = _Tables(universe)
        universe._cache["eval"] = tables
    return tables


def _hermite_block(panel: SamplePanel, lo: int, hi: int, p: int) -> np.ndarray:
    return hermite_table(panel.g[lo:hi], p).reshape(hi - lo, -1)


def _check_panel(panel: SamplePanel, basis: ChaosBasisSpec):
    if panel.N != basis.N or panel.d != basis.d or abs(panel.h - basis.h) > 1e-12 * basis.h:
        raise DataError(
            f"panel geometry (N={panel.N}, d={panel.d}, h={panel.h}) does not match "
            f"basis (N={basis.N}, d={basis.d}, h={basis.h})"
        )


def _check_sample(panel: SamplePanel, m: int):
    if not 0 <= m < panel.M:
        raise IndexError(f"sample {m} out of range [0, {panel.M})")


# ---------------------------------------------------------------------------
# coefficient estimation


def _checked_values(F, panel: SamplePanel) -> np.ndarray:
    F = np.ascontiguousarray(F, dtype=np.float64)
    if F.shape != (panel.M,):
        raise DataError(
            f"need one value per sample: got shape {F.shape} for M={panel.M}"
        )
    finite = np.isfinite(F)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise DataError(f"non-finite functional value at sample {bad}")
    return F


def estimate_coefficients(
    F,
    panel: SamplePanel,
    universe: IndexUniverse,
    *,
    threads: int = 1,
    block_elements: int = DEFAULT_BLOCK_ELEMENTS,
) -> ChaosCoefficients:
    """Estimate chaos coefficients by empirical means.

    d0 is the sample mean of F and each d_n is n!/M times the sample sum of
    F against the Hermite product of its multi-index.  Hermite values are
    tabulated once per sample and block; the block partials are combined by
    a fixed pairwise tree, so the result does not depend on `threads`.

    F may come from the same panel (the default estimation mode downstream)
    or from an independent one with identical geometry.
    """
    F = _checked_values(F, panel)
    _check_panel(panel, universe.basis)
    tables = _tables(universe)
    p = universe.basis.p
    blocks = _blocks(panel.M, len(universe), block_elements)

    def partial(lo, hi):
        h_flat = _hermite_block(panel, lo, hi, p)
        prods = _products(h_flat, tables.main)
        return prods.T @ F[lo:hi], float(F[lo:hi].sum())

    parts = _run_blocks(partial, blocks, threads)
    vec = _pairwise_sum([v for v, _ in parts])
    total = _pairwise_sum([s for _, s in parts])
    coeffs = np.empty(len(universe))
    coeffs[tables.perm] = vec
    coeffs *= universe.weights / panel.M
    return ChaosCoefficients(d0=total / panel.M, coeffs=coeffs, universe=universe)


def estimate_coefficients_saa(
    F,
    panel: SamplePanel,
    universe: IndexUniverse,
    regularization: float = 0.0,
    *,
    block_elements: int = DEFAULT_BLOCK_ELEMENTS,
) -> ChaosCoefficients:
    """Estimate chaos coefficients by a least-squares fit (sample average
    approximation).

    Minimizes the mean squared residual of F against the constant plus all
    Hermite product regressors, via normal equations with an optional ridge
    added to the whole diagonal.  The Gram matrix is accumulated serially in
    block order, so the result never depends on threading.
    """
    F = _checked_values(F, panel)
    _check_panel(panel, universe.basis)
    if regularization < 0.0:
        raise ConfigurationError(f"ridge must be >= 0, got {regularization}")
    U = len(universe)
    if panel.M <= U + 1:
        raise UnderdeterminedError(
            f"least-squares fit needs M > {U + 1} samples for {U} indices, got M={panel.M}"
        )
    tables = _tables(universe)
    p = universe.basis.p
    gram = np.zeros((U + 1, U + 1))
    rhs = np.zeros(U + 1)
    for lo, hi in _blocks(panel.M, U + 1, block_elements):
        h_flat = _hermite_block(panel, lo, hi, p)
        design = np.empty((hi - lo, U + 1))
        design[:, 0] = 1.0
        _products(h_flat, tables.main, out=design[:, 1:])
        gram += design.T @ design
        rhs += design.T @ F[lo:hi]
    if regularization > 0.0:
        gram[np.diag_indices_from(gram)] += regularization
    else:
        try:
            chol_diag = np.diag(np.linalg.cholesky(gram))
            cond_est = (chol_diag.max() / chol_diag.min()) ** 2
        except np.linalg.LinAlgError:
            cond_est = np.inf
        if cond_est > GRAM_CONDITION_LIMIT:
            suggestion = 1e-8 * float(np.diag(gram).max())
            raise IllConditionedError(
                f"Gram matrix condition estimate {cond_est:.3g} exceeds "
                f"{GRAM_CONDITION_LIMIT:.0e}; retry with regularization="
                f"{suggestion:.3g} or more"
            )
    solution = np.linalg.solve(gram, rhs)
    coeffs = np.empty(U)
    coeffs[tables.perm] = solution[1:]
    return ChaosCoefficients(d0=float(solution[0]), coeffs=coeffs, universe=universe)


# ---------------------------------------------------------------------------
# pathwise evaluation at grid points


def _z0(coeffs: ChaosCoefficients, l: int) -> float:
    """Derivative at the left endpoint: the first-step degree-1 coefficient
    of component l scaled by 1/sqrt(h)."""
    basis = coeffs.basis
    return (1.0 / math.sqrt(basis.h)) * float(
        coeffs.coeffs[coeffs.universe.unit_rank(l, 1)]
    )


def conditional_expectation_grid(
    coeffs: ChaosCoefficients, panel: SamplePanel, m: int, r: int
) -> float:
    """Conditional expectation of the expansion given the first r increments
    of sample m.

    Only multi-indices whose slots all lie in the first r time steps
    contribute; r = 0 returns d0 and r = N returns the full pathwise value
    of the expansion (evaluate_chaos shares this code path).
    """
    basis = coeffs.basis
    _check_panel(panel, basis)
    _check_sample(panel, m)
    if not 0 <= r <= basis.N:
        raise IndexError(f"grid index {r} out of range [0, {basis.N}]")
    if r == 0:
        return float(coeffs.d0)
    table = hermite_table(panel.g[m], basis.p)  # (N, d, p+1)
    universe = coeffs.universe
    birth = universe.birth
    values = coeffs.coeffs
    N = basis.N
    acc = float(coeffs.d0)
    for rank, (slots, degs) in enumerate(universe.sparse):
        if birth[rank] > r:
            continue
        term = float(values[rank])
        for slot, deg in zip(slots, degs):
            term *= table[slot % N, slot // N, deg]
        acc += term
    return float(acc)


def evaluate_chaos(coeffs: ChaosCoefficients, panel: SamplePanel, m: int) -> float:
    """Pathwise value of the truncated expansion at sample m."""
    return conditional_expectation_grid(coeffs, panel, m, coeffs.basis.N)


def malliavin_derivative_grid(
    coeffs: ChaosCoefficients, panel: SamplePanel, m: int, r: int, l: int = 1
) -> float:
    """Malliavin derivative (component l) of the conditional expectation at
    grid point r, evaluated at sample m.

    Differentiating drops one Hermite degree at the slot (l, r) and scales
    by 1/sqrt(h); only indices whose last active step is exactly r and with
    positive degree there contribute.  r = 0 returns the limiting value
    from the first-step degree-1 coefficient.
    """
    basis = coeffs.basis
    _check_panel(panel, basis)
    _check_sample(panel, m)
    if not 0 <= r <= basis.N:
        raise IndexError(f"grid index {r} out of range [0, {basis.N}]")
    if not 1 <= l <= basis.d:
        raise IndexError(f"component {l} out of range [1, {basis.d}]")
    if r == 0:
        return _z0(coeffs, l)
    table = hermite_table(panel.g[m], basis.p)
    universe = coeffs.universe
    birth = universe.birth
    values = coeffs.coeffs
    N = basis.N
    slot_rl = (l - 1) * N + (r - 1)
    acc = 0.0
    for rank, (slots, degs) in enumerate(universe.sparse):
        if birth[rank] > r or slot_rl not in slots:
            continue
        term = float(values[rank])
        for slot, deg in zip(slots, degs):
            if slot == slot_rl:
                deg = deg - 1
            term *= table[slot % N, slot // N, deg]
        acc += term
    return acc / math.sqrt(basis.h)


# ---------------------------------------------------------------------------
# pathwise evaluation between grid points


def _intra_step(basis: ChaosBasisSpec, t: float):
    if not 0.0 < t <= basis.T * (1.0 + 1e-12):
        raise DataError(f"time {t} outside (0, {basis.T}]")
    r = int(math.ceil(t / basis.h - 1e-9))
    r = min(max(r, 1), basis.N)
    tau = t - (r - 1) * basis.h
    return r, tau


def _intra_increment(increment, d: int) -> np.ndarray:
    w = np.atleast_1d(np.asarray(increment, dtype=np.float64))
    if w.shape != (d,):
        raise DataError(f"increment must have one entry per component, got {w.shape}")
    return w


def conditional_expectation_intra(
    coeffs: ChaosCoefficients, panel: SamplePanel, m: int, t: float, increment
) -> float:
    """Conditional expectation at an arbitrary time t in (0, T].

    `increment` holds B_t - B at the grid point below t, per component (the
    panel only stores full-step increments).  At t equal to a grid point
    this reduces to conditional_expectation_grid up to roundoff.
    """
    basis = coeffs.basis
    _check_panel(panel, basis)
    _check_sample(panel, m)
    r, tau = _intra_step(basis, t)
    w = _intra_increment(increment, basis.d)
    ratio = tau / basis.h
    table = hermite_table(panel.g[m], basis.p)
    table_t = hermite_table(w / math.sqrt(tau), basis.p)  # (d, p+1)
    universe = coeffs.universe
    birth = universe.birth
    values = coeffs.coeffs
    N = basis.N
    acc = float(coeffs.d0)
    for rank, (slots, degs) in enumerate(universe.sparse):
        if birth[rank] > r:
            continue
        term = float(values[rank])
        for slot, deg in zip(slots, degs):
            i, j = slot % N, slot // N
            if i == r - 1:
                term *= ratio ** (deg / 2.0) * table_t[j, deg]
            else:
                term *= table[i, j, deg]
        acc += term
    return float(acc)


def malliavin_derivative_intra(
    coeffs: ChaosCoefficients,
    panel: SamplePanel,
    m: int,
    t: float,
    increment,
    l: int = 1,
) -> float:
    """Malliavin derivative (component l) of the conditional expectation at
    an arbitrary time t in (0, T]; see conditional_expectation_intra."""
    basis = coeffs.basis
    _check_panel(panel, basis)
    _check_sample(panel, m)
    if not 1 <= l <= basis.d:
        raise IndexError(f"component {l} out of range [1, {basis.d}]")
    r, tau = _intra_step(basis, t)
    w = _intra_increment(increment, basis.d)
    ratio = tau / basis.h
    table = hermite_table(panel.g[m], basis.p)
    table_t = hermite_table(w / math.sqrt(tau), basis.p)
    universe = coeffs.universe
    birth = universe.birth
    values = coeffs.coeffs
    N = basis.N
    slot_rl = (l - 1) * N + (r - 1)
    acc = 0.0
    for rank, (slots, degs) in enumerate(universe.sparse):
        if birth[rank] > r or slot_rl not in slots:
            continue
        term = float(values[rank])
        for slot, deg in zip(slots, degs):
            i, j = slot % N, slot // N
            if i == r - 1:
                if slot == slot_rl:
                    term *= ratio ** ((deg - 1) / 2.0) * table_t[j, deg - 1]
                else:
                    term *= ratio ** (deg / 2.0) * table_t[j, deg]
            else:
                term *= table[i, j, deg]
        acc += term
    return acc / math.sqrt(basis.h)


# ---------------------------------------------------------------------------
# full-panel fields (the solver's hot path)


def conditional_fields(
    coeffs: ChaosCoefficients,
    panel: SamplePanel,
    *,
    threads: int = 1,
    block_elements: int = DEFAULT_BLOCK_ELEMENTS,
):
    """Conditional expectations and derivatives at every grid point for every
    sample.

    Returns (E, D) with E of shape (M, N+1) and D of shape (M, N+1, d);
    row 0 holds d0 and the limiting derivative.  Work runs in sample blocks
    (optionally threaded); blocks write disjoint rows, so the output is
    bitwise independent of `threads`.
    """
    basis = coeffs.basis
    _check_panel(panel, basis)
    universe = coeffs.universe
    tables = _tables(universe)
    M, N, d, p = panel.M, basis.N, basis.d, basis.p
    expectation = np.empty((M, N + 1))
    derivative = np.empty((M, N + 1, d))
    expectation[:, 0] = coeffs.d0
    for l in range(1, d + 1):
        derivative[:, 0, l - 1] = _z0(coeffs, l)
    dperm = coeffs.coeffs[tables.perm]
    deriv_values = [
        [
            None if tables.deriv[r0][j] is None else coeffs.coeffs[tables.deriv[r0][j][0]]
            for j in range(d)
        ]
        for r0 in range(N)
    ]
    inv_sqrt_h = 1.0 / math.sqrt(basis.h)
    alive = tables.alive_counts

    def work(lo, hi):
        h_flat = _hermite_block(panel, lo, hi, p)
        prods = _products(h_flat, tables.main)
        partial = np.zeros((hi - lo, N))
        for r in range(1, N + 1):
            a, b = alive[r - 1], alive[r]
            if b > a:
                partial[:, r - 1] = prods[:, a:b] @ dperm[a:b]
        np.cumsum(partial, axis=1, out=partial)
        expectation[lo:hi, 1:] = partial
        expectation[lo:hi, 1:] += coeffs.d0
        for r in range(1, N + 1):
            for j in range(d):
                entry = tables.deriv[r - 1][j]
                if entry is None:
                    derivative[lo:hi, r, j] = 0.0
                    continue
                _, pset = entry
                reduced = _products(h_flat, pset)
                derivative[lo:hi, r, j] = (reduced @ deriv_values[r - 1][j]) * inv_sqrt_h
        return None

    _run_blocks(work, _blocks(M, len(universe), block_elements), threads)
    return expectation, derivative


# ---------------------------------------------------------------------------
# persistence


def write_coefficients_table(coeffs: ChaosCoefficients, path: str) -> None:
    """Write a human-readable table: rank, slot notation, value."""
    basis = coeffs.basis
    universe = coeffs.universe
    with open(path, "w") as fh:
        fh.write(
            f"# chaos coefficients  N={basis.N} d={basis.d} p={basis.p} "
            f"T={basis.T!r} size={len(universe)}\n"
        )
        fh.write(f"d0\t.\t{coeffs.d0:.17g}\n")
        for rank, (slots, degs) in enumerate(universe.sparse):
            label = "*".join(
                f"({slot // basis.N + 1},{slot % basis.N + 1})^{deg}"
                for slot, deg in zip(slots, degs)
            )
            fh.write(f"{rank}\t{label}\t{coeffs.coeffs[rank]:.17g}\n")


def save_coefficients(coeffs: ChaosCoefficients, path: str) -> None:
    """Binary snapshot aligned with the canonical multi-index order."""
    basis = coeffs.basis
    with open(path, "wb") as fh:
        fh.write(
            _COEF_HEADER.pack(
                _COEF_MAGIC, basis.N, basis.d, basis.p, len(coeffs.coeffs), basis.T
            )
        )
        fh.write(np.float64(coeffs.d0).tobytes())
        fh.write(np.ascontiguousarray(coeffs.coeffs, dtype="<f8").tobytes())


def load_coefficients(path: str, universe: IndexUniverse) -> ChaosCoefficients:
    """Load a snapshot written by save_coefficients for the same universe."""
    basis = universe.basis
    with open(path, "rb") as fh:
        header = fh.read(_COEF_HEADER.size)
        if len(header) < _COEF_HEADER.size:
            raise DataError(f"truncated coefficient file {path!r}")
        magic, N, d, p, size, T = _COEF_HEADER.unpack(header)
        if magic != _COEF_MAGIC:
            raise DataError(f"not a coefficient file: {path!r}")
        if (N, d, p, size) != (basis.N, basis.d, basis.p, len(universe)) or T != basis.T:
            raise DataError(
                f"coefficient file {path!r} was written for basis "
                f"N={N} d={d} p={p} T={T}, not the given universe"
            )
        d0 = float(np.frombuffer(fh.read(8), dtype="<f8")[0])
        coeffs = np.fromfile(fh, dtype="<f8", count=size).astype(np.float64)
    if coeffs.size != size:
        raise DataError(f"coefficient file {path!r} body is incomplete")
    return ChaosCoefficients(d0=d0, coeffs=coeffs, universe=universe)

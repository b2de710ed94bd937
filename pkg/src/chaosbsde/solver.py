"""Forward Picard iteration driven by chaos-expansion conditional fields.

Each iteration assembles the scalar functional

    F = xi + h * sum_{i=1..N} f(t_i, Y_i, Z_i)

from the previous grids, estimates its chaos coefficients, and rebuilds all
M trajectories from the closed-form conditional expectations and Malliavin
derivatives:

    Y_j = E_{t_j}(F) - h * sum_{i<=j} f(t_i, Y_i, Z_i),      Z_j = D_{t_j} E_{t_j}(F),

with row 0 given by the estimated mean and the rescaled first-step
coefficients.  The driver is always evaluated on the previous iterate, both
inside F and inside the running integral.
"""

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import ChaosBasisSpec
from .brownian import CorrelationSpec, SamplePanel, brownian_paths, correlate, sample_panel
from .chaos import (
    DEFAULT_BLOCK_ELEMENTS,
    ChaosCoefficients,
    _z0,
    conditional_fields,
    estimate_coefficients,
    estimate_coefficients_saa,
)
from .errors import ConfigurationError, DataError, NumericalBlowupError
from .multiindex import IndexUniverse, enumerate_universe
from .seeds import derive_seed

BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class BSDEProblem:
    """Driver f(t, y, z) and terminal functional of the Brownian paths.

    driver is vectorized over samples: y has shape (M,), z has shape (M, d)
    and the result must have shape (M,).  terminal maps the grid Brownian
    paths (M, N+1, d) to the M terminal values.
    """

    driver: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    terminal: Callable[[np.ndarray], np.ndarray]
    d: int = 1


@dataclass(frozen=True)
class SolverConfig:
    """All knobs of one solve."""

    p: int
    N: int
    M: int
    K_it: int
    seed: int
    T: float = 1.0
    method: str = "empirical"  # or "saa"
    sample_mode: str = "same"  # or "fresh"
    correlation: Optional[CorrelationSpec] = None
    threads: int = 0  # 0 = all cores
    ridge: float = 0.0
    quadrature: str = "right"  # or "trapezoid"
    block_elements: int = DEFAULT_BLOCK_ELEMENTS

    def __post_init__(self):
        if self.K_it < 1:
            raise ConfigurationError(f"need at least one iteration, got K_it={self.K_it}")
        if self.M < 1:
            raise ConfigurationError(f"need at least one sample, got M={self.M}")
        if self.method not in ("empirical", "saa"):
            raise ConfigurationError(f"unknown estimation method {self.method!r}")
        if self.sample_mode not in ("same", "fresh"):
            raise ConfigurationError(f"unknown sample mode {self.sample_mode!r}")
        if self.quadrature not in ("right", "trapezoid"):
            raise ConfigurationError(f"unknown quadrature rule {self.quadrature!r}")

    def basis(self, d: int) -> ChaosBasisSpec:
        return ChaosBasisSpec(T=self.T, N=self.N, d=d, p=self.p)

    def resolved_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


@dataclass
class _ShadowState:
    """Independent panel, terminal values and grids used in fresh-sample mode."""

    panel: SamplePanel
    xi: np.ndarray
    y: np.ndarray
    z: np.ndarray


@dataclass
class SolverState:
    """Grids and traces after some number of Picard iterations."""

    y: np.ndarray  # (M, N+1)
    z: np.ndarray  # (M, N+1, d)
    xi: np.ndarray  # (M,)
    y0_trace: list = field(default_factory=list)
    z0_trace: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    shadow: Optional[_ShadowState] = None
    coefficients: Optional[ChaosCoefficients] = None  # of the last assembled F

    @property
    def iterations(self) -> int:
        return len(self.y0_trace)

    @property
    def Y0(self) -> float:
        return self.y0_trace[-1]

    @property
    def Z0(self) -> np.ndarray:
        return self.z0_trace[-1]


def _terminal_values(problem: BSDEProblem, panel: SamplePanel, correlation) -> np.ndarray:
    source = correlate(panel, correlation) if correlation is not None else panel
    xi = np.asarray(problem.terminal(brownian_paths(source)), dtype=np.float64)
    if xi.shape != (panel.M,):
        raise DataError(
            f"terminal functional returned shape {xi.shape}, expected ({panel.M},)"
        )
    finite = np.isfinite(xi)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise DataError(f"terminal functional returned a non-finite value at sample {bad}")
    return xi


def _driver_values(problem, y, z, basis, q):
    """f(t_i, Y_i, Z_i) for i = 0..N on the previous grids, shape (M, N+1)."""
    M = y.shape[0]
    vals = np.empty((M, basis.N + 1))
    for i in range(basis.N + 1):
        out = np.asarray(problem.driver(i * basis.h, y[:, i], z[:, i, :]), dtype=np.float64)
        if out.shape != (M,):
            raise DataError(f"driver returned shape {out.shape}, expected ({M},)")
        vals[:, i] = out
    bad = ~np.isfinite(vals)
    if bad.any():
        m, i = np.argwhere(bad)[0]
        raise NumericalBlowupError(
            f"driver produced a non-finite value at iteration {q}, sample {m}, grid step {i}"
        )
    return vals


def _quadrature(f_vals, h, rule):
    """Terminal integral and running integral of the driver values.

    Returns (total, running) with running[:, j-1] the integral up to t_j.
    The right-endpoint rule ignores column 0; the trapezoid option averages
    adjacent nodes.
    """
    if rule == "right":
        running = np.cumsum(f_vals[:, 1:], axis=1)
        running *= h
    else:
        midpoints = 0.5 * (f_vals[:, 1:] + f_vals[:, :-1])
        running = np.cumsum(midpoints, axis=1)
        running *= h
    return running[:, -1].copy(), running


def picard_step(
    state: SolverState,
    problem: BSDEProblem,
    panel: SamplePanel,
    universe: IndexUniverse,
    config: SolverConfig,
) -> SolverState:
    """Advance the solver by exactly one Picard iteration.

    Returns a new state; the input state is left untouched so callers can
    keep per-iteration snapshots.
    """
    basis = universe.basis
    h = basis.h
    q = state.iterations
    threads = config.resolved_threads()
    t0 = time.perf_counter()

    f_vals = _driver_values(problem, state.y, state.z, basis, q)
    total, running = _quadrature(f_vals, h, config.quadrature)
    functional = state.xi + total
    bad = ~np.isfinite(functional)
    if bad.any():
        m = int(np.flatnonzero(bad)[0])
        raise NumericalBlowupError(
            f"non-finite Picard functional at iteration {q}, sample {m}"
        )
    t1 = time.perf_counter()

    if config.sample_mode == "fresh":
        shadow = state.shadow
        sf_vals = _driver_values(problem, shadow.y, shadow.z, basis, q)
        s_total, s_running = _quadrature(sf_vals, h, config.quadrature)
        s_functional = shadow.xi + s_total
        est_values, est_panel = s_functional, shadow.panel
    else:
        est_values, est_panel = functional, panel
    if config.method == "saa":
        coeffs = estimate_coefficients_saa(
            est_values, est_panel, universe, config.ridge,
            block_elements=config.block_elements,
        )
    else:
        coeffs = estimate_coefficients(
            est_values, est_panel, universe,
            threads=threads, block_elements=config.block_elements,
        )
    t2 = time.perf_counter()

    new_y, new_z = conditional_fields(
        coeffs, panel, threads=threads, block_elements=config.block_elements
    )
    new_y[:, 1:] -= running

    new_shadow = None
    if config.sample_mode == "fresh":
        sy, sz = conditional_fields(
            coeffs, state.shadow.panel, threads=threads,
            block_elements=config.block_elements,
        )
        sy[:, 1:] -= s_running
        new_shadow = _ShadowState(
            panel=state.shadow.panel, xi=state.shadow.xi, y=sy, z=sz
        )

    limit = BLOWUP_FACTOR * (1.0 + float(np.abs(state.xi).max()))
    peak = float(np.abs(new_y).max())
    if not math.isfinite(peak) or peak > limit:
        raise NumericalBlowupError(
            f"Picard iterate diverged at iteration {q}: max |Y| = {peak:.6g} "
            f"exceeds {limit:.6g}"
        )
    t3 = time.perf_counter()

    timings = dict(state.timings)
    iteration_times = list(timings.get("iterations", []))
    iteration_times.append(
        {
            "assemble": t1 - t0,
            "estimate": t2 - t1,
            "update": t3 - t2,
            "total": t3 - t0,
        }
    )
    timings["iterations"] = iteration_times
    return SolverState(
        y=new_y,
        z=new_z,
        xi=state.xi,
        y0_trace=state.y0_trace + [float(coeffs.d0)],
        z0_trace=state.z0_trace
        + [np.array([_z0(coeffs, l) for l in range(1, basis.d + 1)])],
        timings=timings,
        shadow=new_shadow,
        coefficients=coeffs,
    )


def initial_state(
    problem: BSDEProblem, panel: SamplePanel, config: SolverConfig
) -> SolverState:
    """Zero grids plus terminal values (and the shadow panel in fresh mode)."""
    M, N, d = panel.M, panel.N, panel.d
    xi = _terminal_values(problem, panel, config.correlation)
    shadow = None
    if config.sample_mode == "fresh":
        basis = config.basis(problem.d)
        aux_panel = sample_panel(M, basis, derive_seed(config.seed, "fresh-panel"))
        shadow = _ShadowState(
            panel=aux_panel,
            xi=_terminal_values(problem, aux_panel, config.correlation),
            y=np.zeros((M, N + 1)),
            z=np.zeros((M, N + 1, d)),
        )
    return SolverState(
        y=np.zeros((M, N + 1)),
        z=np.zeros((M, N + 1, d)),
        xi=xi,
        shadow=shadow,
    )


def solve(problem: BSDEProblem, config: SolverConfig) -> SolverState:
    """Run the full scheme: sample a panel, then iterate picard_step K_it times.

    The result is a deterministic function of the problem and the config
    (seed included); thread count never changes the output bits.
    """
    if config.correlation is not None and config.correlation.d != problem.d:
        raise ConfigurationError(
            f"correlation dimension {config.correlation.d} does not match "
            f"problem dimension {problem.d}"
        )
    basis = config.basis(problem.d)
    t0 = time.perf_counter()
    panel = sample_panel(config.M, basis, config.seed)
    t1 = time.perf_counter()
    universe = enumerate_universe(basis)
    t2 = time.perf_counter()
    state = initial_state(problem, panel, config)
    t3 = time.perf_counter()
    state.timings.update(
        {"panel": t1 - t0, "universe": t2 - t1, "terminal": t3 - t2}
    )
    for _ in range(config.K_it):
        state = picard_step(state, problem, panel, universe, config)
    return state

"""BSDE solver based on chaos-expansion conditional expectations."""

from .basis import ChaosBasisSpec
from .brownian import (
    CorrelationSpec,
    SamplePanel,
    brownian_path,
    brownian_paths,
    correlate,
    load_panel,
    sample_panel,
    save_panel,
)
from .chaos import (
    ChaosCoefficients,
    conditional_expectation_grid,
    conditional_expectation_intra,
    conditional_fields,
    estimate_coefficients,
    estimate_coefficients_saa,
    evaluate_chaos,
    load_coefficients,
    malliavin_derivative_grid,
    malliavin_derivative_intra,
    save_coefficients,
    write_coefficients_table,
)
from .errors import (
    ChaosBsdeError,
    ConfigurationError,
    DataError,
    IllConditionedError,
    NumericalBlowupError,
    ResourceLimitError,
    UnderdeterminedError,
)
from .hermite import hermite_eval, hermite_eval_all
from .multiindex import (
    IndexUniverse,
    MultiIndex,
    enumerate_universe,
    factorial_weight,
    universe_size,
)
from .oracle import (
    ReferenceValue,
    barrier_call_mc,
    basket_put_linear_mc,
    linear_bsde_closed_form,
)
from .problems import (
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
from .seeds import derive_seed
from .solver import BSDEProblem, SolverConfig, SolverState, initial_state, picard_step, solve

__version__ = "0.1.0"

"""Batch front door: solve, sweep, validate, oracle.

Run configurations are flat INI files with three sections::

    [problem]
    name = cos_sup          ; plus problem-specific keys (K, L, r, ...)

    [solver]
    p = 2
    N = 20
    M = 100000
    K_it = 6
    seed = 20260810
    ; optional: T, method, sample_mode, threads, ridge, quadrature

    [output]
    dir = runs/cos          ; optional, else $CHAOSBSDE_OUTDIR, else cwd
    emit_paths = false

Exit codes: 0 ok, 2 configuration error, 3 numerical/solver error,
4 validation failure.
"""

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .brownian import brownian_paths, sample_panel
from .errors import ChaosBsdeError, ConfigurationError
from .oracle import barrier_call_mc, basket_put_linear_mc, linear_bsde_closed_form
from .problems import BlackScholesParams, get_problem
from .seeds import derive_seed
from .solver import BSDEProblem, SolverConfig, solve

OUTDIR_ENV = "CHAOSBSDE_OUTDIR"
_FMT = "%.17g"

_SOLVER_KEYS = {
    "p": int,
    "N": int,
    "M": int,
    "K_it": int,
    "seed": int,
    "T": float,
    "method": str,
    "sample_mode": str,
    "threads": int,
    "ridge": float,
    "quadrature": str,
}
_REQUIRED_SOLVER_KEYS = ("p", "N", "M", "K_it", "seed")


@dataclass
class RunConfig:
    problem_name: str
    problem_params: dict
    solver_kwargs: dict
    out_dir: str
    emit_paths: bool


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def load_run_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys like M, K_it, S0 are case-sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}")
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path!r}: {exc}")
    if not parser.has_section("problem"):
        raise ConfigurationError(f"config {path!r} is missing the [problem] section")
    if not parser.has_section("solver"):
        raise ConfigurationError(f"config {path!r} is missing the [solver] section")
    problem = dict(parser.items("problem"))
    name = problem.pop("name", None)
    if name is None:
        raise ConfigurationError(
            f"config {path!r} is missing key 'name' in section [problem]"
        )
    params = {key: _coerce(val) for key, val in problem.items()}

    solver_raw = dict(parser.items("solver"))
    solver_kwargs = {}
    for key, cast in _SOLVER_KEYS.items():
        if key in solver_raw:
            raw = solver_raw.pop(key)
            try:
                solver_kwargs[key] = cast(raw)
            except ValueError:
                raise ConfigurationError(
                    f"config {path!r}: key {key!r} in [solver] has invalid value {raw!r}"
                )
    if solver_raw:
        raise ConfigurationError(
            f"config {path!r}: unknown key(s) {sorted(solver_raw)} in [solver]"
        )
    for key in _REQUIRED_SOLVER_KEYS:
        if key not in solver_kwargs:
            raise ConfigurationError(
                f"config {path!r} is missing key {key!r} in section [solver]"
            )

    out_dir = ""
    emit_paths = False
    if parser.has_section("output"):
        output = dict(parser.items("output"))
        out_dir = output.pop("dir", "")
        flag = output.pop("emit_paths", "false").strip().lower()
        if flag not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigurationError(f"config {path!r}: emit_paths must be boolean")
        emit_paths = flag in ("true", "yes", "1")
        if output:
            raise ConfigurationError(
                f"config {path!r}: unknown key(s) {sorted(output)} in [output]"
            )
    return RunConfig(
        problem_name=name,
        problem_params=params,
        solver_kwargs=solver_kwargs,
        out_dir=out_dir,
        emit_paths=emit_paths,
    )


def _resolve_out_dir(config_dir: str, flag_dir: str) -> str:
    out = flag_dir or config_dir or os.environ.get(OUTDIR_ENV, "") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _lexical(value: float) -> str:
    return _FMT % value


def _write_trace(path: str, y0_trace, z0_trace, iteration_times, d: int):
    with open(path, "w") as fh:
        cols = ["q", "Y0"] + [f"Z0_{l}" for l in range(1, d + 1)] + ["wall_seconds"]
        fh.write(",".join(cols) + "\n")
        for q, (y0, z0, dt) in enumerate(zip(y0_trace, z0_trace, iteration_times), 1):
            row = [str(q), _lexical(y0)] + [_lexical(v) for v in z0] + [_lexical(dt["total"])]
            fh.write(",".join(row) + "\n")


def _write_paths(path: str, state):
    M, n_nodes = state.y.shape
    d = state.z.shape[2]
    with open(path, "w") as fh:
        cols = ["m", "j", "Y"] + [f"Z_{l}" for l in range(1, d + 1)]
        fh.write(",".join(cols) + "\n")
        for m in range(M):
            for j in range(n_nodes):
                row = [str(m), str(j), _lexical(state.y[m, j])]
                row += [_lexical(v) for v in state.z[m, j]]
                fh.write(",".join(row) + "\n")


def _summary_payload(run: RunConfig, setup, config: SolverConfig, state) -> dict:
    return {
        "problem": {"name": run.problem_name, **setup.params},
        "solver": {
            "p": config.p,
            "N": config.N,
            "M": config.M,
            "K_it": config.K_it,
            "seed": config.seed,
            "T": config.T,
            "method": config.method,
            "sample_mode": config.sample_mode,
            "threads": config.threads,
            "ridge": config.ridge,
            "quadrature": config.quadrature,
        },
        "correlation_rho": None if setup.correlation is None else setup.correlation.rho,
        "Y0": state.Y0,
        "Z0": [float(v) for v in state.Z0],
        "iterations": state.iterations,
        "trace_Y0": [float(v) for v in state.y0_trace],
        "trace_Z0": [[float(v) for v in z0] for z0 in state.z0_trace],
        "timings": state.timings,
    }


def _run_from_config(run: RunConfig):
    setup = get_problem(run.problem_name, run.problem_params)
    config = SolverConfig(**run.solver_kwargs, correlation=setup.correlation)
    state = solve(setup.problem, config)
    return setup, config, state


def cmd_solve(args) -> int:
    run = load_run_config(args.config)
    setup, config, state = _run_from_config(run)
    out = _resolve_out_dir(run.out_dir, args.out)
    _write_trace(
        os.path.join(out, "trace.csv"),
        state.y0_trace,
        state.z0_trace,
        state.timings["iterations"],
        setup.problem.d,
    )
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(_summary_payload(run, setup, config, state), fh, indent=2)
        fh.write("\n")
    if run.emit_paths:
        _write_paths(os.path.join(out, "paths.csv"), state)
    z_str = " ".join(_lexical(v) for v in state.Z0)
    print(f"{run.problem_name}: Y0={_lexical(state.Y0)} Z0={z_str} -> {out}")
    return 0


_AXES = ("M", "N", "p", "q")


def cmd_sweep(args) -> int:
    run = load_run_config(args.config)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"sweep values must be integers, got {args.values!r}")
    if not values:
        raise ConfigurationError("empty sweep value list")
    out = _resolve_out_dir(run.out_dir, args.out)
    base_seed = run.solver_kwargs["seed"]
    rows = []
    n_ok = 0
    d = None
    for value in values:
        kwargs = dict(run.solver_kwargs)
        if args.axis == "q":
            kwargs["K_it"] = value  # same seed: the trace prefix is shared
        else:
            kwargs[args.axis] = value
            kwargs["seed"] = derive_seed(base_seed, "sweep", args.axis, value)
        point = replace(run, solver_kwargs=kwargs)
        t0 = time.perf_counter()
        try:
            setup, config, state = _run_from_config(point)
        except ChaosBsdeError as exc:
            rows.append((value, None, None, time.perf_counter() - t0, kwargs["seed"],
                         f"error:{type(exc).__name__}"))
            print(f"sweep {args.axis}={value}: failed: {exc}", file=sys.stderr)
            continue
        d = setup.problem.d
        rows.append(
            (value, state.Y0, state.Z0, time.perf_counter() - t0, config.seed, "ok")
        )
        n_ok += 1
    if d is None:
        d = get_problem(run.problem_name, run.problem_params).problem.d
    with open(os.path.join(out, "sweep.csv"), "w") as fh:
        cols = [args.axis, "Y0"] + [f"Z0_{l}" for l in range(1, d + 1)]
        cols += ["wall_seconds", "seed", "status"]
        fh.write(",".join(cols) + "\n")
        for value, y0, z0, dt, seed, status in rows:
            row = [str(value)]
            row.append(_lexical(y0) if y0 is not None else "nan")
            for l in range(d):
                row.append(_lexical(z0[l]) if z0 is not None else "nan")
            row += [_lexical(dt), str(seed), status]
            fh.write(",".join(row) + "\n")
    print(f"sweep over {args.axis}: {n_ok}/{len(values)} points ok -> {out}")
    return 0 if n_ok else 3


@dataclass
class _Check:
    name: str
    computed: float
    reference: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return abs(self.computed - self.reference) <= self.tolerance


def _validate_checks(fast: bool, M_override, seed: int):
    checks = []
    M_main = M_override or (20_000 if fast else 100_000)
    M_barrier = M_override or (20_000 if fast else 200_000)
    M_basket = M_override or (10_000 if fast else 50_000)
    M_ref = 200_000 if fast else 1_000_000

    # zero driver and zero terminal stay exactly zero
    zero_problem = BSDEProblem(
        driver=lambda t, y, z: np.zeros_like(y),
        terminal=lambda paths: np.zeros(paths.shape[0]),
        d=1,
    )
    state = solve(zero_problem, SolverConfig(p=1, N=8, M=2000, K_it=3, seed=seed))
    peak = max(np.abs(state.y).max(), np.abs(state.z).max())
    checks.append(_Check("zero-problem-exact", peak, 0.0, 0.0))

    # linear driver against the closed form
    setup = get_problem("linear_test")
    config = SolverConfig(p=1, N=20, M=M_main, K_it=8, seed=seed)
    state = solve(setup.problem, config)
    ref = linear_bsde_closed_form(r=setup.params["r"], T=1.0, c=setup.params["c"])
    checks.append(_Check("linear-closed-form", state.Y0, ref.value, 0.01))

    # zero driver with terminal B_T: Y tracks B, Z tracks 1
    setup = get_problem("martingale_test")
    config = SolverConfig(p=1, N=20, M=M_main, K_it=2, seed=seed)
    state = solve(setup.problem, config)
    paths = brownian_paths(sample_panel(config.M, config.basis(1), config.seed))
    checks.append(
        _Check("martingale-Y", float(np.abs(state.y - paths[:, :, 0]).mean()), 0.0, 0.05)
    )
    checks.append(_Check("martingale-Z", float(np.abs(state.z - 1.0).mean()), 0.0, 0.05))

    # barrier option against the plain Monte Carlo oracle
    setup = get_problem("barrier_call")
    config = SolverConfig(p=2, N=20, M=M_barrier, K_it=5, seed=seed)
    state = solve(setup.problem, config)
    p = setup.params
    market = BlackScholesParams(s0=p["S0"], r=p["r"], mu=p["r"], sigma=p["sigma"])
    ref = barrier_call_mc(market, K=p["K"], L=p["L"], T=p["T"], N=20, M_ref=M_ref, seed=seed)
    checks.append(
        _Check("barrier-vs-mc", state.Y0, ref.value, 0.008 if fast else 0.004)
    )

    # basket put with equal rates reduces to the risk-neutral price
    setup = get_problem("basket_put", {"R": 0.02})
    config = SolverConfig(p=2, N=20, M=M_basket, K_it=4, seed=seed,
                          correlation=setup.correlation)
    state = solve(setup.problem, config)
    p = setup.params
    d = int(p["d"])
    market = BlackScholesParams(
        s0=[p["S0"]] * d, r=p["r"], mu=[p["mu"]] * d, sigma=[p["sigma"]] * d
    )
    ref = basket_put_linear_mc(
        market, K=p["K"], rho=p["rho"], T=p["T"], M_ref=M_ref, seed=seed
    )
    checks.append(
        _Check("basket-linear-reduction", state.Y0, ref.value, 0.3 if fast else 0.12)
    )
    return checks


def cmd_validate(args) -> int:
    checks = _validate_checks(args.fast, args.M, args.seed)
    width = max(len(c.name) for c in checks)
    failures = 0
    for c in checks:
        status = "PASS" if c.ok else "FAIL"
        if not c.ok:
            failures += 1
        print(
            f"{c.name:<{width}}  computed={c.computed: .6g}  reference={c.reference: .6g}"
            f"  tol={c.tolerance:g}  {status}"
        )
    print(f"validate: {len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 4


_ORACLE_DEFAULTS = {
    "linear": {"r": 0.05, "T": 1.0, "c": 1.0},
    "barrier_call": {
        "r": 0.01, "sigma": 0.2, "S0": 1.0, "K": 0.9, "L": 0.85,
        "T": 1.0, "N": 20, "M_ref": 1_000_000, "seed": 0,
    },
    "basket_put": {
        "d": 5, "r": 0.02, "sigma": 0.2, "S0": 100.0, "K": 95.0, "rho": 0.1,
        "T": 1.0, "M_ref": 1_000_000, "seed": 0,
    },
}


def cmd_oracle(args) -> int:
    name = args.name
    if name not in _ORACLE_DEFAULTS:
        raise ConfigurationError(
            f"unknown oracle {name!r}; available: {', '.join(sorted(_ORACLE_DEFAULTS))}"
        )
    params = dict(_ORACLE_DEFAULTS[name])
    for token in args.params:
        if "=" not in token:
            raise ConfigurationError(f"oracle parameters must be key=value, got {token!r}")
        key, _, raw = token.partition("=")
        if key not in params:
            raise ConfigurationError(
                f"unknown parameter {key!r} for oracle {name!r}; valid: {sorted(params)}"
            )
        params[key] = _coerce(raw)
    if name == "linear":
        ref = linear_bsde_closed_form(r=params["r"], T=params["T"], c=params["c"])
    elif name == "barrier_call":
        market = BlackScholesParams(
            s0=params["S0"], r=params["r"], mu=params["r"], sigma=params["sigma"]
        )
        ref = barrier_call_mc(
            market, K=params["K"], L=params["L"], T=params["T"],
            N=int(params["N"]), M_ref=int(params["M_ref"]), seed=int(params["seed"]),
        )
    else:
        d = int(params["d"])
        market = BlackScholesParams(
            s0=[params["S0"]] * d, r=params["r"], mu=[params["r"]] * d,
            sigma=[params["sigma"]] * d,
        )
        ref = basket_put_linear_mc(
            market, K=params["K"], rho=params["rho"], T=params["T"],
            M_ref=int(params["M_ref"]), seed=int(params["seed"]),
        )
    print(json.dumps({"oracle": name, **asdict(ref), "params": params}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosbsde",
        description="BSDE solver based on chaos-expansion conditional expectations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solve from a config file")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", default="", help="output directory override")
    p_solve.set_defaults(fn=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="re-solve along one parameter axis")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated integers")
    p_sweep.add_argument("--out", default="", help="output directory override")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the built-in oracle comparisons")
    p_val.add_argument("--fast", action="store_true", help="smaller runs, wider bands")
    p_val.add_argument("--M", type=int, default=None, help="override all sample counts")
    p_val.add_argument("--seed", type=int, default=20260810)
    p_val.set_defaults(fn=cmd_validate)

    p_oracle = sub.add_parser("oracle", help="print one reference value as JSON")
    p_oracle.add_argument("name")
    p_oracle.add_argument("params", nargs="*", help="key=value overrides")
    p_oracle.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ChaosBsdeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

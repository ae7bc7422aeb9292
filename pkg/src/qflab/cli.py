"""Command-line front door.

Eight verbs: bs-vacuum, mg-vacuum, martingale-check, constraint-solve,
price, evolve, simulate, classify. Options come from long-form flags,
optionally merged over a key-value config file (flags win). Every
successful run writes the declared output plus a ``<out>.manifest``
record (full parameter echo, seed where used, tool version, and the
exact argv for bit-identical reruns). Exit codes: 0 success, 1
numerical failure (no root, singular solve) with a machine-readable
error record, 2 validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import (
    EvolutionConfig,
    Payoff,
    evolve,
    price_barrier,
    price_option,
)
from .martingale import (
    MartingaleReport,
    extended_constraint_residual,
    martingale_residual,
    mc_martingale_check,
    solve_extended_constraint,
)
from .model import (
    Grid1D,
    Grid2D,
    MarketParams,
    MGParams,
    SDEParams,
    StateVector,
    load_config,
    sample_extended_martingale_state,
    sample_martingale_state,
)
from .operators import (
    BOUNDARY_DIRICHLET,
    BOUNDARY_ONE_SIDED,
    Potential,
    build_bs_hamiltonian,
    build_mg_hamiltonian,
)
from .sde import export_csv, simulate_gbm, simulate_mg
from .vacuum import (
    bs_extremum_roots,
    bs_vacuum_exact,
    bs_vacuum_strong,
    bs_vacuum_weak,
    classify_information_flow,
    mg_case_solver,
    mg_regime_solver,
)

_BS_FAMILIES = {
    "exact": bs_vacuum_exact,
    "weak": bs_vacuum_weak,
    "strong": bs_vacuum_strong,
    "extremum": bs_extremum_roots,
}


def _add_market_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--r", type=float, default=None, help="spot rate")
    sub.add_argument("--sigma-sq", type=float, default=None, help="squared volatility")


def _add_mg_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--r", type=float, default=None, help="spot rate")
    sub.add_argument("--lambda", dest="lam", type=float, default=None)
    sub.add_argument("--mu", type=float, default=None)
    sub.add_argument("--zeta", type=float, default=None)
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--rho", type=float, default=None)


def _add_grid_flags(sub: argparse.ArgumentParser, two_d: bool = False) -> None:
    sub.add_argument("--x-min", type=float, default=None)
    sub.add_argument("--x-max", type=float, default=None)
    sub.add_argument("--n-points", type=int, default=None)
    if two_d:
        sub.add_argument("--y-min", type=float, default=None)
        sub.add_argument("--y-max", type=float, default=None)
        sub.add_argument("--m-points", type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qflab",
        description="Operator, field-equilibrium, pricing, and path-simulation workbench",
    )
    parser.add_argument("--version", action="version", version=f"qflab {__version__}")
    subs = parser.add_subparsers(dest="verb", required=True)

    s = subs.add_parser("bs-vacuum", help="one-factor equilibrium field roots")
    _add_market_flags(s)
    s.add_argument("--n", type=int, required=True, help="expansion order")
    s.add_argument("--family", choices=sorted(_BS_FAMILIES), default="exact")
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("mg-vacuum", help="two-factor equilibrium solutions")
    _add_mg_flags(s)
    s.add_argument("--y", type=float, required=True, help="log-variance point")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument(
        "--regime",
        default=None,
        help="strong-strong | weak-weak | strong-x-weak-y | weak-x-strong-y "
        "(omit for the closed-form low-order cases)",
    )
    s.add_argument("--phi-x", type=float, default=1.0)
    s.add_argument("--csv-out", default=None, help="also write roots as CSV")
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("martingale-check", help="operator annihilation residual")
    s.add_argument("--model", choices=["bs", "mg"], required=True)
    _add_mg_flags(s)
    s.add_argument("--sigma-sq", type=float, default=None)
    s.add_argument("--state", choices=["price", "extended"], default="price")
    s.add_argument("--grid", default="default", help="'default' or 'explicit'")
    _add_grid_flags(s, two_d=True)
    s.add_argument("--tol", type=float, default=None)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("constraint-solve", help="root of the extended constraint")
    _add_mg_flags(s)
    s.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("price", help="vanilla or knock-out price curve")
    _add_market_flags(s)
    s.add_argument("--payoff", choices=["call", "put", "bond", "asset"], required=True)
    s.add_argument("--strike", type=float, default=None)
    s.add_argument("--t", type=float, required=True, help="maturity")
    _add_grid_flags(s)
    s.add_argument("--dt", type=float, default=None, help="target step (default t/400)")
    s.add_argument("--barrier-level", type=float, default=None, help="down-and-out level (log-price)")
    s.add_argument(
        "--corridor", type=float, nargs=2, default=None, metavar=("LO", "HI"),
        help="double-knockout corridor (log-price)",
    )
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("evolve", help="time evolution diagnostics")
    _add_market_flags(s)
    s.add_argument("--mode", choices=["euclidean", "unitary"], default="euclidean")
    s.add_argument("--boundary", choices=["one-sided", "dirichlet"], default="one-sided")
    s.add_argument("--state", choices=["asset", "bond", "gaussian"], required=True)
    s.add_argument("--center", type=float, default=0.0, help="gaussian state center")
    s.add_argument("--width", type=float, default=0.2, help="gaussian state width")
    _add_grid_flags(s)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--n-steps", type=int, required=True)
    s.add_argument("--flow-out", default=None, help="write mass/norm series CSV")
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("simulate", help="Monte Carlo path ensembles")
    s.add_argument("--model", choices=["gbm", "mg"], required=True)
    _add_mg_flags(s)
    s.add_argument("--sigma-sq", type=float, default=None)
    s.add_argument("--drift", type=float, required=True, help="expected return")
    s.add_argument("--s0", type=float, required=True)
    s.add_argument("--v0", type=float, default=None, help="initial variance (mg)")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--n-paths", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--force-big", action="store_true", help="lift the CSV size guard")
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    s = subs.add_parser("classify", help="information-flow / symmetry report")
    s.add_argument("--model", choices=["bs", "mg"], required=True)
    _add_mg_flags(s)
    s.add_argument("--sigma-sq", type=float, default=None)
    s.add_argument("--y", type=float, default=None)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)

    return parser


def _merge(args: argparse.Namespace, attr: str, cfg: dict, key: str):
    """Flag value if given, else the config value, else None."""
    val = getattr(args, attr, None)
    if val is None and key in cfg:
        return cfg[key]
    return val


def _require(value, flag: str):
    if value is None:
        raise ValueError(f"missing required option {flag} (flag or config)")
    return value


def _market_params(args, cfg) -> MarketParams:
    return MarketParams(
        r=_require(_merge(args, "r", cfg, "r"), "--r"),
        sigma_sq=_require(_merge(args, "sigma_sq", cfg, "sigma_sq"), "--sigma-sq"),
    )


def _mg_params(args, cfg) -> MGParams:
    return MGParams(
        r=_require(_merge(args, "r", cfg, "r"), "--r"),
        lam=_require(_merge(args, "lam", cfg, "lambda"), "--lambda"),
        mu=_require(_merge(args, "mu", cfg, "mu"), "--mu"),
        zeta=_require(_merge(args, "zeta", cfg, "zeta"), "--zeta"),
        alpha=_require(_merge(args, "alpha", cfg, "alpha"), "--alpha"),
        rho=_require(_merge(args, "rho", cfg, "rho"), "--rho"),
    )


def _grid_1d(args, cfg, default: Grid1D | None = None) -> Grid1D:
    x_min = _merge(args, "x_min", cfg, "x_min")
    x_max = _merge(args, "x_max", cfg, "x_max")
    n_points = _merge(args, "n_points", cfg, "n_points")
    if x_min is None and x_max is None and n_points is None and default is not None:
        return default
    return Grid1D(
        x_min=_require(x_min, "--x-min"),
        x_max=_require(x_max, "--x-max"),
        n_points=_require(n_points, "--n-points"),
    )


def _grid_2d(args, cfg, default: Grid2D | None = None) -> Grid2D:
    keys = ("x_min", "x_max", "n_points", "y_min", "y_max", "m_points")
    vals = {k: _merge(args, k, cfg, k) for k in keys}
    if all(v is None for v in vals.values()) and default is not None:
        return default
    x = Grid1D(
        x_min=_require(vals["x_min"], "--x-min"),
        x_max=_require(vals["x_max"], "--x-max"),
        n_points=_require(vals["n_points"], "--n-points"),
    )
    y = Grid1D(
        x_min=_require(vals["y_min"], "--y-min"),
        x_max=_require(vals["y_max"], "--y-max"),
        n_points=_require(vals["m_points"], "--m-points"),
    )
    return Grid2D(x_axis=x, y_axis=y)


def _write_manifest(out: str, verb: str, args: argparse.Namespace, argv: list[str]) -> None:
    lines = [f"verb = {verb}", f"version = {__version__}"]
    skip = {"verb", "config"}
    for name in sorted(vars(args)):
        if name in skip:
            continue
        val = getattr(args, name)
        if val is None:
            continue
        if isinstance(val, float):
            lines.append(f"opt_{name} = {val!r}")
        elif isinstance(val, (list, tuple)):
            lines.append(f"opt_{name} = {' '.join(repr(v) for v in val)}")
        else:
            lines.append(f"opt_{name} = {val}")
    quoted = " ".join(str(a) for a in argv)
    lines.append(f"argv = {quoted}")
    Path(str(out) + ".manifest").write_text("\n".join(lines) + "\n")


def _curve_csv(xs: np.ndarray, values: np.ndarray, header: str = "x,value") -> str:
    lines = [header]
    for x, v in zip(xs, values):
        lines.append(f"{float(x)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def _run_bs_vacuum(args, cfg) -> None:
    p = _market_params(args, cfg)
    sol = _BS_FAMILIES[args.family](p, args.n)
    lines = ["index,phi"]
    for k, pt in enumerate(sol.roots):
        lines.append(f"{k},{float(pt.phi_x)!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")


def _run_mg_vacuum(args, cfg) -> None:
    p = _mg_params(args, cfg)
    if args.regime is None:
        sol = mg_case_solver(p, args.y, args.n, args.m)
    else:
        sol = mg_regime_solver(p, args.y, args.n, args.m, args.regime, phi_x=args.phi_x)
    Path(args.out).write_text(sol.to_record())
    if args.csv_out:
        Path(args.csv_out).write_text(sol.to_csv())


def _run_martingale_check(args, cfg) -> MartingaleReport:
    if args.model == "bs":
        p = _market_params(args, cfg)
        g = _grid_1d(args, cfg, default=Grid1D(-4.0, 4.0, 801))
        op = build_bs_hamiltonian(p, g)
        state = sample_martingale_state(g)
    else:
        p = _mg_params(args, cfg)
        g2 = _grid_2d(
            args,
            cfg,
            default=Grid2D(Grid1D(-1.0, 1.0, 201), Grid1D(-4.0, -2.0, 81)),
        )
        op = build_mg_hamiltonian(p, g2)
        if args.state == "extended":
            state = sample_extended_martingale_state(g2)
        else:
            x = g2.x_axis.points
            vals = np.repeat(np.exp(x), g2.y_axis.n_points)
            state = StateVector(vals, g2)
    report = martingale_residual(op, state, tol=args.tol)
    Path(args.out).write_text(report.to_record())
    return report


def _run_constraint_solve(args, cfg) -> None:
    p = _mg_params(args, cfg)
    root = solve_extended_constraint(p, (args.bracket[0], args.bracket[1]))
    lines = [
        f"y_star = {float(root.y_star)!r}",
        f"residual = {float(root.residual)!r}",
        f"bracket_lo = {float(root.bracket[0])!r}",
        f"bracket_hi = {float(root.bracket[1])!r}",
    ]
    Path(args.out).write_text("\n".join(lines) + "\n")


def _run_price(args, cfg) -> None:
    p = _market_params(args, cfg)
    g = _grid_1d(args, cfg)
    if args.payoff in ("call", "put") and args.strike is None:
        raise ValueError("--strike is required for call and put payoffs")
    payoff = {
        "call": lambda: Payoff.call(args.strike),
        "put": lambda: Payoff.put(args.strike),
        "bond": Payoff.bond,
        "asset": Payoff.martingale_asset,
    }[args.payoff]()
    dt = args.dt if args.dt is not None else args.t / 400.0
    cfg_run = EvolutionConfig(dt=dt, n_steps=max(1, int(round(args.t / dt))))
    if args.barrier_level is not None and args.corridor is not None:
        raise ValueError("choose one of --barrier-level or --corridor")
    if args.barrier_level is not None:
        curve = price_barrier(
            p, payoff, Potential.down_and_out(args.barrier_level), args.t, g, cfg_run
        )
    elif args.corridor is not None:
        curve = price_barrier(
            p,
            payoff,
            Potential.double_knockout(args.corridor[0], args.corridor[1]),
            args.t,
            g,
            cfg_run,
        )
    else:
        curve = price_option(p, payoff, args.t, g, cfg_run)
    Path(args.out).write_text(_curve_csv(g.points, curve.values))


def _run_evolve(args, cfg) -> None:
    p = _market_params(args, cfg)
    g = _grid_1d(args, cfg)
    boundary = BOUNDARY_DIRICHLET if args.boundary == "dirichlet" else BOUNDARY_ONE_SIDED
    op = build_bs_hamiltonian(p, g, boundary=boundary)
    if args.state == "asset":
        state = sample_martingale_state(g)
    elif args.state == "bond":
        state = StateVector(np.ones(g.n_points), g)
    else:
        state = StateVector(
            np.exp(-((g.points - args.center) ** 2) / (2.0 * args.width**2)), g
        )
    cfg_run = EvolutionConfig(dt=args.dt, n_steps=args.n_steps, mode=args.mode)
    out, flow = evolve(op, state, cfg_run)
    vals = np.abs(out.values) if args.mode == "unitary" else np.real(out.values)
    header = "x,modulus" if args.mode == "unitary" else "x,value"
    Path(args.out).write_text(_curve_csv(g.points, vals, header=header))
    if args.flow_out:
        Path(args.flow_out).write_text(flow.to_csv())


def _run_simulate(args, cfg) -> None:
    if args.model == "gbm":
        sigma_sq = _require(_merge(args, "sigma_sq", cfg, "sigma_sq"), "--sigma-sq")
        r = _require(_merge(args, "r", cfg, "r"), "--r")
        sp = SDEParams(expected_return=args.drift, base=MarketParams(r=r, sigma_sq=sigma_sq))
        ens = simulate_gbm(sp, args.s0, args.t, args.dt, args.n_paths, args.seed)
    else:
        p = _mg_params(args, cfg)
        v0 = _require(args.v0, "--v0")
        ens = simulate_mg(p, args.drift, args.s0, v0, args.t, args.dt, args.n_paths, args.seed)
    export_csv(ens, args.out, force=args.force_big)


def _run_classify(args, cfg) -> None:
    if args.model == "bs":
        p = _market_params(args, cfg)
        report = classify_information_flow(p)
    else:
        p = _mg_params(args, cfg)
        if args.y is None:
            raise ValueError("--y is required for the two-factor classification")
        report = classify_information_flow(p, y=args.y)
    Path(args.out).write_text(report.to_record())


_RUNNERS = {
    "bs-vacuum": _run_bs_vacuum,
    "mg-vacuum": _run_mg_vacuum,
    "martingale-check": _run_martingale_check,
    "constraint-solve": _run_constraint_solve,
    "price": _run_price,
    "evolve": _run_evolve,
    "simulate": _run_simulate,
    "classify": _run_classify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    cfg: dict = {}
    try:
        if getattr(args, "config", None):
            cfg = load_config(args.config)
        result = _RUNNERS[args.verb](args, cfg)
    except ArithmeticError as exc:
        record = (
            f"error = {type(exc).__name__}\n"
            f"verb = {args.verb}\n"
            f"message = {exc}\n"
        )
        sys.stdout.write(record)
        if getattr(args, "out", None):
            Path(args.out).write_text(record)
        return 1
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error = validation\nverb = {args.verb}\nmessage = {exc}\n")
        return 2

    _write_manifest(args.out, args.verb, args, argv)
    if isinstance(result, MartingaleReport):
        sys.stdout.write(f"verdict = {result.verdict}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

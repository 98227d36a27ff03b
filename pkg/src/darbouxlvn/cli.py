"""Command line interface: ``python3 -m darbouxlvn run|list|validate|export``."""

from __future__ import annotations

import argparse
import sys

from .errors import ScenarioParseError, ScenarioValidationError
from .oracle import DEFAULT_FD_STEP, DEFAULT_RK4_STEP
from .scenarios import (
    MODES,
    TimeGrid,
    builtin_scenarios,
    dump_scenario,
    get_builtin,
    load_scenario,
    resolve_scenario,
    run,
    to_csv,
    to_json,
    write_output,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TOLERANCE = 2


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darbouxlvn", description="Darboux-dressed solutions of the nonlinear Liouville-von Neumann equation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate a scenario on a time grid")
    p.add_argument("--scenario", required=True, help="builtin name or path to a scenario file")
    p.add_argument("--mode", choices=MODES, default="evolve")
    p.add_argument("--t-start", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--steps", type=int, help="number of grid intervals")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--fd-step", type=float, default=DEFAULT_FD_STEP)
    p.add_argument("--rk4-step", type=float, default=DEFAULT_RK4_STEP)
    p.add_argument("--iterations", type=int)
    p.add_argument("--iteration-mu", type=_complex_arg, action="append", help="spectral parameter of an extra level (repeatable)")
    p.add_argument("--gauge-lambda", type=float)

    sub.add_parser("list", help="list builtin scenarios")

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("export", help="write a builtin scenario as a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    return parser


def _run(args) -> int:
    spec = resolve_scenario(args.scenario)
    g = spec.grid
    grid = TimeGrid(
        g.start if args.t_start is None else args.t_start,
        g.end if args.t_end is None else args.t_end,
        g.steps if args.steps is None else args.steps,
    )
    spec = spec.with_overrides(
        grid=grid,
        iterations=args.iterations,
        iteration_mu=tuple(args.iteration_mu) if args.iteration_mu else None,
        gauge_lambda=args.gauge_lambda,
    )
    out = run(spec, args.mode, fd_step=args.fd_step, rk4_step=args.rk4_step)
    if args.out:
        write_output(out, args.out, args.format)
    else:
        sys.stdout.write(to_csv(out) if args.format == "csv" else to_json(out) + "\n")
    if out.residuals is not None:
        print(
            f"{spec.name}: max ODE residual {out.residuals.max_ode_residual:.3e}, "
            f"max RK4 deviation {out.max_rk4_deviation:.3e} -> {'PASS' if out.passed else 'FAIL'}",
            file=sys.stderr,
        )
        if not out.passed:
            return EXIT_TOLERANCE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            for spec in builtin_scenarios():
                print(f"{spec.name}\tdim={spec.H.shape[0]}\tvariant={spec.variant}\ta={spec.a:g}\tmu={spec.mu}")
            return EXIT_OK
        if args.command == "validate":
            spec = load_scenario(args.scenario)
            print(f"{spec.name}: ok")
            return EXIT_OK
        if args.command == "export":
            dump_scenario(get_builtin(args.scenario), args.out)
            return EXIT_OK
        return _run(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioValidationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

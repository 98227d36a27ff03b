"""Run every builtin scenario in verify mode and print the headline checks.

Usage: python3 scripts/reproduce_examples.py [--out DIR] [--format csv|json]
"""

import argparse
import math
import os
import time

import numpy as np

from darbouxlvn.evolution import f_a, u_int
from darbouxlvn.scenarios import builtin_scenarios, get_builtin, run, write_output

R2, R5, R7, R15 = (math.sqrt(x) for x in (2, 5, 7, 15))


def headline_checks():
    """Closed-form values that each builtin should reproduce exactly."""
    rows = []
    ctx = get_builtin("ex51").context()
    ts = (-3.0, -1.0, 0.0, 1.0, 3.0)
    rows.append(("ex51", "F(t) vs cosh(t/2)", max(abs(f_a(ctx, t) - math.cosh(t / 2)) for t in ts)))
    rows.append(("ex51", "U_int(0,0) vs (1+r2)/2 - r2/(1+e^t)",
                 max(abs(u_int(ctx, t)[0, 0] - ((1 + R2) / 2 - R2 / (1 + math.exp(t)))) for t in ts)))
    sp = get_builtin("ex53")
    rows.append(("ex53", "Tr rho(0) vs (15+r5)/2", abs(np.trace(sp.U0).real - (15 + R5) / 2)))
    ctx = get_builtin("ex56").context()
    rows.append(("ex56", "F(t) vs (e^5t+e^9t)/2 (relative)",
                 max(abs(f_a(ctx, t) * 2 / (math.exp(5 * t) + math.exp(9 * t)) - 1) for t in np.linspace(-3, 3, 13))))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", help="directory for per-scenario outputs")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    print(f"{'scenario':<8} {'points':>7} {'max residual':>13} {'max RK4 dev':>12} {'seconds':>8}  verdict")
    ok = True
    for spec in builtin_scenarios():
        t0 = time.perf_counter()
        out = run(spec, "verify")
        if spec.is_tensor:
            sub = run(spec, "subsystem")
        elapsed = time.perf_counter() - t0
        ok &= bool(out.passed)
        print(f"{spec.name:<8} {len(out.series):>7} {out.residuals.max_ode_residual:>13.3e} "
              f"{out.max_rk4_deviation:>12.3e} {elapsed:>8.2f}  {'PASS' if out.passed else 'FAIL'}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_output(out, os.path.join(args.out, f"{spec.name}.{args.format}"), args.format)
            if spec.is_tensor:
                write_output(sub, os.path.join(args.out, f"{spec.name}_subsystem.{args.format}"), args.format)

    print()
    for name, what, err in headline_checks():
        print(f"{name:<8} {what:<40} {err:.2e}")
    return 0 if ok else 2


if __name__ == "__main__":
    raise SystemExit(main())

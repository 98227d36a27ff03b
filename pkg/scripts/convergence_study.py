"""Convergence of the two numerical cross-checks on the 3x3 example.

Prints the RK4 error against the closed form for a sequence of step sizes
(expect ratios near 16) and the five-point residual against the
difference step ``h`` (truncation ~h^4 until rounding ~1e-16/h dominates).
"""

import argparse

import numpy as np

from darbouxlvn.evolution import u1_of_t
from darbouxlvn.oracle import pointwise_residual, rk4_integrate
from darbouxlvn.scenarios import get_builtin


def rk4_errors(ctx, steps, t_end):
    exact = u1_of_t(ctx, t_end)
    U0 = u1_of_t(ctx, 0.0)
    errs = []
    for h in steps:
        s = rk4_integrate("quadratic", ctx.H, U0, [0.0, t_end], max_step=h, adaptive=False)
        errs.append(float(np.linalg.norm(s.matrices[-1] - exact)))
    return errs


def fd_residuals(ctx, hs, times):
    return [pointwise_residual(lambda t: u1_of_t(ctx, t), "quadratic", ctx.H, times, h=h).max_ode_residual for h in hs]


def main(argv=None):
    parser = argparse.ArgumentParser(description="RK4 and finite-difference convergence")
    parser.add_argument("--scenario", default="ex51")
    parser.add_argument("--t-end", type=float, default=2.0)
    args = parser.parse_args(argv)
    ctx = get_builtin(args.scenario).context()

    steps = [0.2 / 2 ** k for k in range(6)]
    errs = rk4_errors(ctx, steps, args.t_end)
    print("RK4 (fixed step) error at t_end")
    print(f"{'step':>10} {'error':>12} {'ratio':>8}")
    for i, (h, e) in enumerate(zip(steps, errs)):
        ratio = f"{errs[i - 1] / e:8.2f}" if i and e > 0 else " " * 8
        print(f"{h:>10.5f} {e:>12.3e} {ratio}")

    hs = [10.0 ** -k for k in range(1, 7)]
    res = fd_residuals(ctx, hs, np.linspace(-3, 3, 13))
    print("\nfive-point residual of the closed form")
    print(f"{'h':>10} {'max residual':>14}")
    for h, r in zip(hs, res):
        print(f"{h:>10.0e} {r:>14.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

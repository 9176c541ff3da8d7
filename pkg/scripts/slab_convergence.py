#!/usr/bin/env python3
"""Refinement study: slab scheme against the direct solver on one flow.

Runs the reference integration once, then the slab scheme over a ladder of
partition sizes, and reports the sup-in-time L2 error, the worst Picard
contraction ratio per level, and the fitted convergence rate.

Example:
    python3 scripts/slab_convergence.py --n 16 --T 0.5 --levels 4 8 16 32
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from vslab.estimates import convergence_study, sup_l2_distance
from vslab.reference import StepperConfig, run_reference
from vslab.reports import write_csv
from vslab.slabs import make_provider, run_slab_scheme, uniform_partition
from vslab.spectral import Grid, initial_vorticity


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=16, help="grid modes per axis")
    parser.add_argument("--T", type=float, default=0.5, help="final time")
    parser.add_argument("--nu", type=float, default=1.0, help="viscosity")
    parser.add_argument("--dt", type=float, default=1e-3, help="reference step")
    parser.add_argument("--initial", default="taylor-green")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--provider", default="self-consistent",
                        choices=("self-consistent", "reference"))
    parser.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16, 32])
    parser.add_argument("--tol", type=float, default=1e-10)
    parser.add_argument("--out", default="", help="optional CSV path for the table")
    args = parser.parse_args(argv)

    grid = Grid(args.n)
    w0 = initial_vorticity(grid, args.initial, seed=args.seed)
    t0 = time.perf_counter()
    reference = run_reference(
        grid, w0, args.T, StepperConfig(dt=args.dt, nu=args.nu), field_every=10
    )
    print(f"reference: {args.initial} {args.n}^3 T={args.T} dt={args.dt} "
          f"({time.perf_counter() - t0:.1f}s)")

    rows = []
    for n_slabs in args.levels:
        provider = make_provider(
            args.provider, trajectory=reference if args.provider == "reference" else None
        )
        t0 = time.perf_counter()
        result = run_slab_scheme(
            grid, w0, uniform_partition(args.T, n_slabs), provider,
            nu=args.nu, tol=args.tol,
        )
        err = sup_l2_distance(grid, result.trajectory, reference, reference.times)
        worst_rho = max(r.max_ratio for r in result.records)
        worst_iters = max(r.iterations for r in result.records)
        rows.append((n_slabs, args.T / n_slabs, err, worst_rho, worst_iters))
        print(f"  N={n_slabs:>4}  dt_k={args.T / n_slabs:.5f}  sup_err={err:.4e}  "
              f"max_rho={worst_rho:.4f}  max_iters={worst_iters}  "
              f"({time.perf_counter() - t0:.1f}s)")

    fit = convergence_study([r[1] for r in rows], [r[2] for r in rows])
    print(f"fitted rate {fit.rate:.3f}  refinement ratios "
          f"{['%.3f' % r for r in fit.ratios]}  monotone={fit.monotone}")
    if args.out:
        write_csv(args.out, ("slabs", "dt_k", "sup_l2_error", "max_rho", "max_iters"), rows)
        print(f"table written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

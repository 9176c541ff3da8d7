#!/usr/bin/env python3
"""Rebuild every ledger column of a run directory from its raw series.

Reads series.csv, slabs.csv, and summary.csv as emitted by a run, recomputes
the slab load, the sup/dissipation functional, the slab sup, the per-slab
growth bound and its margin, plus the global bound, using nothing but the
standard library, and compares each value against the emitted one at 1e-12.

Applies to runs whose slab loads were derived from the recorded velocity
series (reference runs and self-consistent slab runs).  Exit code 0 when all
columns reproduce, 1 otherwise.
"""

import argparse
import csv
import math
import os
import sys


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def trapezoid(xs, ys):
    return sum(
        0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)
    )


def interp(t, times, values):
    """Piecewise-linear interpolation, clamped at the ends (matches np.interp)."""
    if t <= times[0]:
        return values[0]
    if t >= times[-1]:
        return values[-1]
    import bisect

    j = bisect.bisect_right(times, t) - 1
    lam = (t - times[j]) / (times[j + 1] - times[j])
    return (1.0 - lam) * values[j] + lam * values[j + 1]


def slab_window(times, t_lo, t_hi, *series):
    """Samples strictly inside the slab plus interpolated endpoint values."""
    idx = [i for i, t in enumerate(times) if t_lo < t < t_hi]
    ts = [t_lo] + [times[i] for i in idx] + [t_hi]
    out = [ts]
    for values in series:
        out.append(
            [interp(t_lo, times, values)]
            + [values[i] for i in idx]
            + [interp(t_hi, times, values)]
        )
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("outdir", help="run directory holding series.csv / slabs.csv / summary.csv")
    parser.add_argument("--tol", type=float, default=1e-12)
    args = parser.parse_args(argv)

    series = read_csv(os.path.join(args.outdir, "series.csv"))
    slab_rows = read_csv(os.path.join(args.outdir, "slabs.csv"))
    summary = {r["quantity"]: r["value"] for r in read_csv(os.path.join(args.outdir, "summary.csv"))}

    times = [float(r["t"]) for r in series]
    energy = [float(r["energy"]) for r in series]
    enstrophy = [float(r["enstrophy"]) for r in series]
    dissipation = [float(r["dissipation"]) for r in series]
    ens_dis = [float(r["enstrophy_dissipation"]) for r in series]

    eps0 = float(summary["eps0"])
    T = float(summary["T"])
    K0 = enstrophy[0]

    failures = []
    prev_m = K0
    t_lo = times[0]
    for row in slab_rows:
        k = int(row["k"])
        width = float(row["dt_k"])
        t_hi = t_lo + width
        ts, ens_w, ensdis_w, energy_w, dis_w = slab_window(
            times, t_lo, t_hi, enstrophy, ens_dis, energy, dissipation
        )
        m_k = max(ens_w)
        f_k = m_k + eps0 * trapezoid(ts, ensdis_w)
        kstar = width * max(energy_w) + trapezoid(ts, dis_w)
        bound = prev_m * math.exp((1.0 - eps0) * width)
        margin = bound - m_k
        for name, mine, theirs in (
            ("M_k", m_k, float(row["M_k"])),
            ("f_k", f_k, float(row["f_k"])),
            ("kstar", kstar, float(row["kstar"])),
            ("gronwall_bound", bound, float(row["gronwall_bound"])),
            ("margin", margin, float(row["margin"])),
        ):
            if not close(mine, theirs, args.tol):
                failures.append(f"slab {k} {name}: recomputed {mine!r} vs emitted {theirs!r}")
        prev_m = m_k
        t_lo = t_hi

    global_bound = K0 * math.exp((1.0 - eps0) * T)
    sup_e = max(enstrophy)
    for name, mine in (("global_bound", global_bound), ("sup_enstrophy", sup_e), ("K0", K0)):
        if not close(mine, float(summary[name]), args.tol):
            failures.append(f"summary {name}: recomputed {mine!r} vs emitted {summary[name]!r}")
    if int(summary["global_pass"]) != int(sup_e <= global_bound):
        failures.append("summary global_pass flag does not match recomputation")

    if failures:
        for line in failures:
            print(f"MISMATCH {line}")
        print(f"recompute_ledger: FAIL ({len(failures)} mismatches)")
        return 1
    print(
        f"recompute_ledger: PASS ({len(slab_rows)} slabs, tol {args.tol:g}, "
        f"global bound {global_bound:.6g}, sup enstrophy {sup_e:.6g})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

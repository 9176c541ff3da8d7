"""Command-line surface tying the solvers, the slab scheme, and the monitors.

Subcommands: run-ref, run-slab, compare, study, monitor.  Every command takes
``--config PATH`` plus optional ``--set key=value`` overrides.  Exit codes:
0 success, 1 runtime failure, 2 usage error; failures print one line
starting with ``error:``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from vslab import estimates, reports, slabs, snapshots
from vslab.config import ConfigError, load_config
from vslab.reference import BlowUpError, StepperConfig, run_reference
from vslab.spectral import Grid, initial_vorticity


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="vslab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", required=True, help="path to the run configuration")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key",
        )

    common(sub.add_parser("run-ref", help="direct reference integration"))
    common(sub.add_parser("run-slab", help="time-slab averaged scheme"))
    p = sub.add_parser("compare", help="sup-in-time L2 distance of two snapshot dirs")
    common(p)
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    common(sub.add_parser("study", help="slab-vs-reference refinement study"))
    p = sub.add_parser("monitor", help="replay stored snapshots through the monitors")
    common(p)
    p.add_argument("snapdir")
    return parser


def _initial(grid, cfg):
    if cfg.initial == "file":
        n, _, w = snapshots.load_field(cfg.initial_path)
        if n != grid.n:
            raise ConfigError(
                f"initial_path: snapshot grid {n} does not match configured n={grid.n}"
            )
        return w
    return initial_vorticity(grid, cfg.initial, seed=cfg.seed)


def _partition_for(cfg, trajectory):
    if cfg.policy == "uniform":
        return slabs.uniform_partition(cfg.T, cfg.slabs)
    if trajectory is None or trajectory.series is None:
        raise ConfigError("policy: adaptive partition needs a reference trajectory (reference_dir)")
    return slabs.adaptive_partition(
        cfg.T, cfg.epsilon0, cfg.sobolev_c, trajectory.series, cfg.dt_floor
    )


def _reference_trajectory(cfg, grid):
    if not cfg.reference_dir:
        raise ConfigError("reference_dir: required for provider = reference")
    traj = snapshots.load_trajectory(cfg.reference_dir, nu=cfg.nu)
    if traj.grid != grid:
        raise ConfigError(
            f"reference_dir: snapshot grid {traj.grid.n} does not match configured n={grid.n}"
        )
    return traj


def cmd_run_ref(cfg):
    grid = Grid(cfg.n)
    w0 = _initial(grid, cfg)
    traj = run_reference(
        grid,
        w0,
        cfg.T,
        StepperConfig(dt=cfg.dt, nu=cfg.nu, enstrophy_ceiling=cfg.enstrophy_ceiling),
        scalar_every=cfg.scalar_every,
        field_every=cfg.field_every,
    )
    snapshots.save_trajectory(os.path.join(cfg.outdir, "snapshots"), traj)
    partition = slabs.uniform_partition(cfg.T, cfg.slabs)
    ledger = estimates.enstrophy_ledger(traj, partition, cfg.epsilon0, cfg.sobolev_c)
    reports.emit_reports(cfg.outdir, ledger)
    print(
        f"run-ref: T={cfg.T} steps_dt={cfg.dt} sup_enstrophy={ledger.sup_enstrophy:.6g} "
        f"bound={ledger.global_bound:.6g} global_pass={int(ledger.global_ok)}"
    )
    return 0


def cmd_run_slab(cfg):
    grid = Grid(cfg.n)
    w0 = _initial(grid, cfg)
    reference = None
    if cfg.provider == "reference" or cfg.policy == "adaptive":
        reference = _reference_trajectory(cfg, grid)
    provider = slabs.make_provider(cfg.provider, trajectory=reference)
    partition = _partition_for(cfg, reference)
    result = slabs.run_slab_scheme(
        grid,
        w0,
        partition,
        provider,
        nu=cfg.nu,
        tol=cfg.picard_tol,
        max_iter=cfg.picard_max_iter,
        slab_samples=cfg.slab_samples,
        small_mode_diagnostic=cfg.n <= 8,
    )
    snapshots.save_trajectory(os.path.join(cfg.outdir, "snapshots"), result.trajectory)
    ledger = estimates.enstrophy_ledger(
        result.trajectory, partition, cfg.epsilon0, cfg.sobolev_c, records=result.records
    )
    extra = [("provider", result.provider_name), ("slabs", partition.n_slabs)]
    reports.emit_reports(cfg.outdir, ledger, extra_summary=extra)
    worst = max((r.max_ratio for r in result.records), default=0.0)
    print(
        f"run-slab: slabs={partition.n_slabs} provider={result.provider_name} "
        f"max_rho={worst:.6g} sup_enstrophy={ledger.sup_enstrophy:.6g} "
        f"global_pass={int(ledger.global_ok)}"
    )
    return 0


def cmd_compare(cfg, dir_a, dir_b):
    traj_a = snapshots.load_trajectory(dir_a, nu=cfg.nu, with_series=False)
    traj_b = snapshots.load_trajectory(dir_b, nu=cfg.nu, with_series=False)
    if traj_a.grid != traj_b.grid:
        raise ConfigError(
            f"compare: grid sizes differ ({traj_a.grid.n} vs {traj_b.grid.n})"
        )
    t_lo = max(traj_a.times[0], traj_b.times[0])
    t_hi = min(traj_a.times[-1], traj_b.times[-1])
    if t_hi < t_lo:
        raise ConfigError("compare: trajectories do not overlap in time")
    times = sorted(
        set(float(t) for t in traj_a.times if t_lo <= t <= t_hi)
        | set(float(t) for t in traj_b.times if t_lo <= t <= t_hi)
    )
    dist = estimates.sup_l2_distance(traj_a.grid, traj_a, traj_b, times)
    print(f"compare: sup_l2_distance={dist:.17g} over [{t_lo:.6g}, {t_hi:.6g}]")
    return 0


def cmd_study(cfg):
    grid = Grid(cfg.n)
    w0 = _initial(grid, cfg)
    stepper = StepperConfig(dt=cfg.dt, nu=cfg.nu, enstrophy_ceiling=cfg.enstrophy_ceiling)
    reference = run_reference(
        grid, w0, cfg.T, stepper, scalar_every=cfg.scalar_every, field_every=cfg.field_every
    )
    provider_traj = reference if cfg.provider == "reference" else None
    levels = cfg.parsed_levels()
    widths, errors = [], []
    rows = []
    for n_slabs in levels:
        provider = slabs.make_provider(cfg.provider, trajectory=provider_traj)
        partition = slabs.uniform_partition(cfg.T, n_slabs)
        result = slabs.run_slab_scheme(
            grid,
            w0,
            partition,
            provider,
            nu=cfg.nu,
            tol=cfg.picard_tol,
            max_iter=cfg.picard_max_iter,
            slab_samples=cfg.slab_samples,
        )
        err = estimates.sup_l2_distance(
            grid, result.trajectory, reference, reference.times
        )
        widths.append(cfg.T / n_slabs)
        errors.append(err)
        rows.append((n_slabs, cfg.T / n_slabs, err))
        subdir = os.path.join(cfg.outdir, f"N{n_slabs}")
        ledger = estimates.enstrophy_ledger(
            result.trajectory, partition, cfg.epsilon0, cfg.sobolev_c, records=result.records
        )
        reports.emit_reports(subdir, ledger)
    fit = estimates.convergence_study(widths, errors)
    os.makedirs(cfg.outdir, exist_ok=True)
    reports.write_csv(
        os.path.join(cfg.outdir, "study.csv"), ("slabs", "dt_k", "sup_l2_error"), rows
    )
    print(
        f"study: levels={levels} rate={fit.rate:.4f} monotone={int(fit.monotone)} "
        f"errors={[format(e, '.3e') for e in fit.errors]}"
    )
    return 0


def cmd_monitor(cfg, snapdir):
    traj = snapshots.load_trajectory(snapdir, nu=cfg.nu)
    grid = traj.grid
    s = traj.series
    residual = estimates.energy_identity_residual(s.times, s.energy, s.dissipation, nu=cfg.nu)
    grad_gap = max(grad_vorticity for grad_vorticity in (
        estimates.grad_vorticity_check(grid, grid.biot_savart(w)) for w in traj.fields
    ))
    u_fields = [grid.biot_savart(w) for w in traj.fields]
    rows = [("energy_identity_residual", residual), ("grad_vorticity_max_gap", grad_gap)]
    if len(traj.times) >= 3:
        monitor = estimates.dt_u_monitor(traj.times, u_fields, grid)
        half = estimates.dt_u_monitor(traj.times[::2], u_fields[::2], grid)
        common = np.isin(monitor.times, half.times)
        band = float(np.max(np.abs(monitor.margins[common] - half.margins))) if np.any(common) else 0.0
        rows += [
            ("dt_u_min_margin", monitor.min_margin),
            ("dt_u_fd_band", band),
            ("dt_u_pass", int(monitor.min_margin >= -band)),
        ]
        h = traj.times[1] - traj.times[0]
        ratios = []
        for m in range(1, len(traj.times) - 1):
            dtu = (u_fields[m + 1] - u_fields[m - 1]) / (2.0 * h)
            try:
                ratios.append(estimates.ladyzhenskaya_ratio(grid, dtu))
            except ValueError:
                continue
        if ratios:
            worst = max(ratios)
            rows += [
                ("ladyzhenskaya_max_ratio", worst),
                ("ladyzhenskaya_constant", cfg.ladyzhenskaya_c),
                ("ladyzhenskaya_pass", int(worst <= cfg.ladyzhenskaya_c)),
            ]
    hg = estimates.hgamma_diagnostic(traj.times, traj.fields, cfg.gamma, grid)
    rows.append((f"hgamma_{cfg.gamma}", hg.value))
    os.makedirs(cfg.outdir, exist_ok=True)
    reports.write_csv(os.path.join(cfg.outdir, "monitors.csv"), ("quantity", "value"), rows)
    for name, value in rows:
        print(f"monitor: {name}={value}")
    return 0


def cli_dispatch(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(parser.format_usage(), file=sys.stderr, end="")
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, overrides=args.overrides)
        if args.command == "run-ref":
            return cmd_run_ref(cfg)
        if args.command == "run-slab":
            return cmd_run_slab(cfg)
        if args.command == "compare":
            return cmd_compare(cfg, args.dir_a, args.dir_b)
        if args.command == "study":
            return cmd_study(cfg)
        if args.command == "monitor":
            return cmd_monitor(cfg, args.snapdir)
        raise UsageError(f"unknown subcommand {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, slabs.PartitionError, snapshots.SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (slabs.PicardError, BlowUpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

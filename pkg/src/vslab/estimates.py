"""Runtime monitors for the energy/enstrophy inequalities and rate studies.

Everything here is a pure function of sampled series or spectral snapshots.
Monitors never abort a run: a violated inequality is data, recorded with its
signed margin, so a run can exhibit counter-evidence as readily as
confirmation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, trapezoid

from vslab.slabs import TimePartition, SlabSolution, compute_kstar, slab_window
from vslab.spectral import BOX_VOLUME, Grid
from vslab.trajectory import Trajectory


# -- pointwise field identities ------------------------------------------------


def grad_vorticity_check(grid: Grid, u, div_tol=1e-8):
    """Relative gap between sum|grad u_i|^2 and sum|w_i|^2 for w = curl u.

    A modewise algebraic identity for divergence-free fields: |k|^2 |uhat|^2
    = |k x uhat|^2 whenever k.uhat = 0.  The mean mode contributes to neither
    side, so constants pass with both sides zero.
    """
    rel = grid.divergence_rel(u)
    if rel > div_tol:
        raise ValueError(f"field must be divergence-free, residual {rel:.3e}")
    lhs = grid.h1sq(u)
    rhs = grid.l2sq(grid.curl(u))
    denom = max(lhs, rhs)
    if denom == 0.0:
        return 0.0
    return abs(lhs - rhs) / denom


def ladyzhenskaya_ratio(grid: Grid, v):
    """|v|_{L4}^2 / (|v|_{L2}^{1/2} |grad v|_{L2}^{3/2}).

    Undefined for constants (zero gradient) and for the zero field; on the
    torus the interpolation inequality needs zero mean, which is why the
    ratio is reported against a configurable constant instead of asserting
    the whole-space one.
    """
    l2 = math.sqrt(grid.l2sq(v))
    h1 = math.sqrt(grid.h1sq(v))
    if l2 == 0.0 or h1 == 0.0:
        raise ValueError("ratio undefined for zero or constant fields")
    return grid.l4(v) ** 2 / (math.sqrt(l2) * h1**1.5)


# -- energy identity -----------------------------------------------------------


def energy_identity_residual(times, energy, dissipation, nu=1.0):
    """Relative defect of |u(T)|^2 + 2 nu int |grad u|^2 dt = |u(0)|^2.

    The dissipation integral uses composite Simpson on the sample times; the
    zero trajectory returns 0 by convention.
    """
    times = np.asarray(times, dtype=np.float64)
    energy = np.asarray(energy, dtype=np.float64)
    dissipation = np.asarray(dissipation, dtype=np.float64)
    if len(times) < 2:
        raise ValueError("need at least two samples")
    if energy[0] == 0.0:
        return 0.0
    integral = float(simpson(dissipation, x=times))
    return abs(energy[-1] + 2.0 * nu * integral - energy[0]) / energy[0]


# -- enstrophy ledger ------------------------------------------------------------


@dataclass
class LedgerRow:
    index: int
    t_lo: float
    t_hi: float
    width: float
    kstar: float
    f_k: float
    M_k: float
    gronwall_bound: float  # M_{k-1} * exp((1-eps0) * width)
    margin: float  # gronwall_bound - M_k, negative means violation
    slab_rule_ok: bool  # 4 C kstar <= 1 - eps0
    recursion_ok: bool
    picard_iterations: int | None = None
    max_ratio: float | None = None


@dataclass
class EstimateLedger:
    rows: list
    K0: float
    eps0: float
    C: float
    T: float
    global_bound: float  # K0 * exp((1-eps0) * T)
    sup_enstrophy: float
    global_ok: bool
    series_times: np.ndarray = field(default_factory=lambda: np.array([]))
    series: dict = field(default_factory=dict)

    @property
    def all_rows_ok(self):
        return all(r.recursion_ok for r in self.rows)

    @property
    def slab_rule_violations(self):
        return [r.index for r in self.rows if not r.slab_rule_ok]


def enstrophy_ledger(trajectory: Trajectory, partition: TimePartition, eps0, C, records=None):
    """Per-slab bookkeeping of the enstrophy bound chain.

    Builds, from the recorded norm series, the slab loads kstar, the running
    sup/dissipation functional f_k, the slab sup M_k, and checks the
    recursion M_k <= M_{k-1} exp((1-eps0) dt_k) with M_0 = K0 together with
    the global cap sup E <= K0 exp((1-eps0) T).  FAIL rows are annotated,
    never raised.
    """
    if not 0.0 < eps0 < 1.0:
        raise ValueError("eps0 must lie in (0,1)")
    if C <= 0:
        raise ValueError("C must be positive")
    s = trajectory.series
    if s is None or len(s) < 2:
        raise ValueError("trajectory carries no usable norm series")
    times = s.times
    K0 = float(s.enstrophy[0])
    T = partition.T
    rows = []
    picard = {r.index: r for r in records} if records else {}
    prev_M = K0
    for k, t_lo, t_hi in partition:
        width = t_hi - t_lo
        ts, ens, ensdis = slab_window(times, t_lo, t_hi, s.enstrophy, s.enstrophy_dissipation)
        M_k = float(np.max(ens))
        f_k = M_k + eps0 * float(trapezoid(ensdis, ts))
        if k in picard:
            kstar = picard[k].kstar
        else:
            kstar = compute_kstar(times, s.energy, s.dissipation, t_lo, t_hi)
        bound = prev_M * math.exp((1.0 - eps0) * width)
        margin = bound - M_k
        rows.append(
            LedgerRow(
                index=k,
                t_lo=t_lo,
                t_hi=t_hi,
                width=width,
                kstar=kstar,
                f_k=f_k,
                M_k=M_k,
                gronwall_bound=bound,
                margin=margin,
                slab_rule_ok=4.0 * C * kstar <= 1.0 - eps0,
                recursion_ok=margin >= 0.0,
                picard_iterations=picard[k].iterations if k in picard else None,
                max_ratio=picard[k].max_ratio if k in picard else None,
            )
        )
        prev_M = M_k
    global_bound = K0 * math.exp((1.0 - eps0) * T)
    sup_e = float(np.max(s.enstrophy))
    return EstimateLedger(
        rows=rows,
        K0=K0,
        eps0=eps0,
        C=C,
        T=T,
        global_bound=global_bound,
        sup_enstrophy=sup_e,
        global_ok=sup_e <= global_bound,
        series_times=times,
        series={
            "energy": s.energy,
            "enstrophy": s.enstrophy,
            "dissipation": s.dissipation,
            "enstrophy_dissipation": s.enstrophy_dissipation,
        },
    )


# -- slab average consistency -----------------------------------------------------


def average_cs_check(solution: SlabSolution, samples=257):
    """Margin of |wbar|^2 <= (1/dt) int |w(t)|^2 dt on a solved slab.

    The right side is Simpson quadrature of the closed-form trajectory, an
    independent route from the closed-form average under test.  Nonnegative
    up to quadrature noise by Cauchy-Schwarz.
    """
    grid = solution.grid
    ts = np.linspace(solution.t_lo, solution.t_hi, samples)
    values = np.array([grid.l2sq(solution.at(t)) for t in ts])
    mean_sq = float(simpson(values, x=ts)) / solution.width
    return mean_sq - grid.l2sq(solution.average())


# -- time-regularity diagnostic ----------------------------------------------------


@dataclass
class HGammaDiagnostic:
    gamma: float
    value: float
    sigma_max: float
    freq_points: int


def _weighted_linear_integral(sigma, values, power):
    """Integral of sigma^power * f(sigma) with f piecewise linear on the grid.

    The weight is integrated exactly per interval, so the quadrature has no
    trouble with the fractional power at sigma = 0.
    """
    a, b = sigma[:-1], sigma[1:]
    fa, fb = values[:-1], values[1:]
    p1 = power + 1.0
    p2 = power + 2.0
    i0 = (b**p1 - a**p1) / p1
    i1 = (b**p2 - a**p2) / p2
    slope = (fb - fa) / (b - a)
    return float(np.sum(fa * i0 + slope * (i1 - a * i0)))


def hgamma_diagnostic(times, fields, gamma, grid: Grid, freq_points=131073):
    """Weighted time-frequency mass of the zero-extended trajectory.

    The trajectory is extended by zero outside its span and held constant on
    each sampling interval, whose transform is known in closed form; the
    spatially-resolved spectrum S(sigma) = sum over components and modes of
    the squared L2 amplitude is then integrated against |sigma|^(2 gamma)
    over the resolvable band |sigma| <= pi/h (angular frequency).  Requires
    gamma in (0, 1/4); the value is finite and deterministic given samples.
    """
    if not 0.0 < gamma < 0.25:
        raise ValueError(f"gamma must lie in (0, 1/4), got {gamma}")
    times = np.asarray(times, dtype=np.float64)
    if len(times) < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    h = float(steps[0])
    if np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise ValueError("samples must be uniformly spaced")
    # hold values on [t_m, t_m + h): the last sample only closes the span
    data = np.stack([np.ravel(f) for f in fields[:-1]])  # (M, 3 n^3)
    M = data.shape[0]
    gram = BOX_VOLUME * (data @ data.conj().T)
    if float(np.max(np.abs(gram))) == 0.0:
        return HGammaDiagnostic(gamma=gamma, value=0.0, sigma_max=np.pi / h, freq_points=freq_points)
    offsets = np.array([np.trace(gram, offset=d) for d in range(M)])
    sigma_max = np.pi / h
    sigma = np.linspace(0.0, sigma_max, freq_points)
    spectrum = np.empty(freq_points)
    block = 16384
    d = np.arange(M)
    for lo in range(0, freq_points, block):
        sl = sigma[lo : lo + block]
        phase = np.exp(1j * np.outer(sl, d * h))
        acc = phase @ offsets
        spectrum[lo : lo + block] = 2.0 * acc.real - offsets[0].real
    # hold-kernel factor |(1 - e^{-i sigma h}) / sigma|^2 = h^2 sinc^2(sigma h / 2)
    half = 0.5 * sigma * h
    kernel = np.full_like(sigma, h**2)
    nz = sigma > 0
    kernel[nz] = (2.0 - 2.0 * np.cos(sigma[nz] * h)) / sigma[nz] ** 2
    weighted = spectrum * kernel
    # trajectory is real, so the spectrum is even: integrate one side twice
    value = 2.0 * _weighted_linear_integral(sigma, weighted, 2.0 * gamma)
    return HGammaDiagnostic(gamma=gamma, value=value, sigma_max=sigma_max, freq_points=freq_points)


# -- time-derivative monitor ---------------------------------------------------------


@dataclass
class DtMonitor:
    times: np.ndarray  # interior sample times
    dtu_l2sq: np.ndarray
    dtu_h1sq: np.ndarray
    phi: np.ndarray  # 27 * enstrophy^2
    margins: np.ndarray
    min_margin: float


def dt_u_monitor(times, u_fields, grid: Grid):
    """Margins of the differential inequality for the velocity time derivative.

    margin = phi |dt u|^2 - d/dt |dt u|^2 - |grad dt u|^2 per interior
    sample, with dt u by centered differences of the stored snapshots and
    phi = 27 (sum |w_i|^2)^2 from the matching vorticity.  The outer time
    derivative uses centered differences where possible and one-sided ones
    at the ends of the interior range.
    """
    times = np.asarray(times, dtype=np.float64)
    if len(times) < 3:
        raise ValueError("need at least three uniformly spaced samples")
    steps = np.diff(times)
    h = float(steps[0])
    if np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise ValueError("samples must be uniformly spaced")
    interior = range(1, len(times) - 1)
    dtu_l2, dtu_h1, phi = [], [], []
    for m in interior:
        dtu = (u_fields[m + 1] - u_fields[m - 1]) / (2.0 * h)
        dtu_l2.append(grid.l2sq(dtu))
        dtu_h1.append(grid.h1sq(dtu))
        phi.append(27.0 * grid.l2sq(grid.curl(u_fields[m])) ** 2)
    dtu_l2 = np.array(dtu_l2)
    dtu_h1 = np.array(dtu_h1)
    phi = np.array(phi)
    ddt = np.zeros_like(dtu_l2)
    if len(dtu_l2) >= 2:
        ddt[0] = (dtu_l2[1] - dtu_l2[0]) / h
        ddt[-1] = (dtu_l2[-1] - dtu_l2[-2]) / h
    if len(dtu_l2) >= 3:
        ddt[1:-1] = (dtu_l2[2:] - dtu_l2[:-2]) / (2.0 * h)
    margins = phi * dtu_l2 - ddt - dtu_h1
    return DtMonitor(
        times=times[1:-1],
        dtu_l2sq=dtu_l2,
        dtu_h1sq=dtu_h1,
        phi=phi,
        margins=margins,
        min_margin=float(np.min(margins)) if len(margins) else 0.0,
    )


# -- convergence studies ----------------------------------------------------------


@dataclass
class RateFit:
    rate: float
    ratios: np.ndarray
    monotone: bool
    dts: np.ndarray
    errors: np.ndarray


def convergence_study(dts, errors):
    """Least-squares slope of log error against log dt.

    A non-monotone error sequence is flagged but still fitted.
    """
    dts = np.asarray(dts, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if len(dts) < 3 or len(dts) != len(errors):
        raise ValueError("need at least three matching refinement levels")
    if np.any(errors <= 0) or np.any(dts <= 0):
        raise ValueError("errors and step sizes must be positive")
    order = np.argsort(dts)[::-1]
    dts, errors = dts[order], errors[order]
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    ratios = errors[1:] / errors[:-1]
    return RateFit(
        rate=slope,
        ratios=ratios,
        monotone=bool(np.all(ratios < 1.0)),
        dts=dts,
        errors=errors,
    )


def sup_l2_distance(grid: Grid, traj_a: Trajectory, traj_b: Trajectory, times):
    """Sup over the given times of the L2 distance between the two trajectories."""
    worst = 0.0
    for t in times:
        d = math.sqrt(grid.l2sq(traj_a.field_at(t) - traj_b.field_at(t)))
        worst = max(worst, d)
    return worst


def piecewise_average_distance(grid: Grid, trajectory: Trajectory, partition: TimePartition, samples_per_slab=32):
    """L2(Q) distance between a velocity trajectory and its slab averages.

    For each slab the average of u is taken over the slab and the squared
    pointwise-in-time L2 gap is integrated with Simpson on a per-slab grid;
    slab contributions add up over the partition.
    """
    total = 0.0
    for _, t_lo, t_hi in partition:
        u_bar = trajectory.velocity_average_over(t_lo, t_hi)
        ts = np.linspace(t_lo, t_hi, samples_per_slab + 1)
        gaps = np.array([grid.l2sq(trajectory.velocity_at(t) - u_bar) for t in ts])
        total += float(simpson(gaps, x=ts))
    return math.sqrt(total)

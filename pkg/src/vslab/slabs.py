"""Time-slab auxiliary scheme with slab-averaged coefficients.

The run interval (0, T) is split into slabs.  On each slab the vorticity
obeys a linear constant-coefficient problem: the transport/stretching
coefficients are the time averages of velocity and vorticity over that very
slab, which makes every Fourier mode an independent scalar ODE

    what'(t) = -nu |k|^2 what(t) + Fhat,      Fhat constant over the slab,

solvable in closed form.  The averages depend on the trajectory they
generate, and the loop is closed by successive substitution: solve with the
current averages, re-average the resulting trajectory, repeat until the
average stops moving in L2.  The measured contraction ratios of that
iteration are recorded per slab; on tiny grids the row-sum contraction bound
of the underlying coefficient ODE system can be evaluated explicitly as a
diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from vslab.spectral import Grid
from vslab.trajectory import ScalarSeries, Trajectory


class PartitionError(ValueError):
    pass


class PicardError(RuntimeError):
    """Successive substitution failed to converge on a slab."""

    def __init__(self, slab_index, diagnostics):
        self.slab_index = slab_index
        self.diagnostics = diagnostics
        ratios = ", ".join(f"{r:.3g}" for r in diagnostics.ratios[-3:])
        super().__init__(
            f"slab {slab_index}: no convergence in {diagnostics.iterations} iterations "
            f"(last ratios {ratios}); the slab is too wide for contraction"
        )


@dataclass(frozen=True)
class TimePartition:
    """Breakpoints 0 = t_0 < t_1 < ... < t_N = T."""

    breakpoints: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.breakpoints, dtype=np.float64)
        if pts.ndim != 1 or len(pts) < 2:
            raise PartitionError("need at least two breakpoints")
        if abs(pts[0]) > 0.0:
            raise PartitionError("partition must start at t=0")
        if np.any(np.diff(pts) <= 0):
            raise PartitionError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", pts)

    @property
    def n_slabs(self):
        return len(self.breakpoints) - 1

    @property
    def T(self):
        return float(self.breakpoints[-1])

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    def slab(self, k):
        return float(self.breakpoints[k]), float(self.breakpoints[k + 1])

    def __iter__(self):
        for k in range(self.n_slabs):
            yield k, *self.slab(k)


def uniform_partition(T: float, n_slabs: int) -> TimePartition:
    if T <= 0 or n_slabs < 1:
        raise PartitionError("T must be positive and n_slabs >= 1")
    return TimePartition(np.linspace(0.0, T, n_slabs + 1))


def slab_window(times, t_lo, t_hi, *arrays):
    """Clip sampled series to [t_lo, t_hi] with interpolated endpoint values.

    Returns (ts, clipped arrays); every quantity the ledger derives per slab
    (sup, trapezoid integrals) is computed on exactly this window so that an
    external recomputation from the emitted series reproduces it.
    """
    times = np.asarray(times, dtype=np.float64)
    if len(times) == 0:
        raise ValueError("empty sample set")
    if t_hi <= t_lo:
        raise ValueError("slab must have positive width")
    span_tol = 1e-9 * max(1.0, abs(t_hi))
    if times[0] > t_lo + span_tol or times[-1] < t_hi - span_tol:
        raise ValueError(
            f"series [{times[0]}, {times[-1]}] does not span the slab [{t_lo}, {t_hi}]"
        )
    inside = (times > t_lo) & (times < t_hi)
    ts = np.concatenate(([t_lo], times[inside], [t_hi]))
    clipped = []
    for arr in arrays:
        arr = np.asarray(arr, dtype=np.float64)
        clipped.append(
            np.concatenate(
                ([np.interp(t_lo, times, arr)], arr[inside], [np.interp(t_hi, times, arr)])
            )
        )
    return (ts, *clipped)


def compute_kstar(times, energy, dissipation, t_lo, t_hi):
    """Slab load: dt * sup |u|^2 + integral of sum |grad u_i|^2 over the slab.

    The sup runs over the samples inside the slab (endpoints included by
    linear interpolation); the integral is the trapezoid rule on the same
    points.
    """
    ts, es, ds = slab_window(times, t_lo, t_hi, energy, dissipation)
    return float((t_hi - t_lo) * np.max(es) + trapezoid(ds, ts))


def adaptive_partition(
    T: float,
    eps0: float,
    C: float,
    series: ScalarSeries,
    dt_floor: float = 1e-4,
) -> TimePartition:
    """Greedy partition keeping 4*C*kstar <= 1 - eps0 on every slab.

    Breakpoints are chosen among the sample times of ``series``; if the rule
    cannot be satisfied even on a single sample interval (or would need a
    slab narrower than ``dt_floor``) the construction fails loudly.
    """
    if not 0.0 < eps0 < 1.0:
        raise PartitionError("eps0 must lie in (0,1)")
    if C <= 0:
        raise PartitionError("C must be positive")
    budget = (1.0 - eps0) / (4.0 * C)
    times = np.asarray(series.times, dtype=np.float64)
    if times[0] > 0.0 or times[-1] < T - 1e-12:
        raise PartitionError("series must span (0,T)")
    candidates = np.unique(np.concatenate((times[(times > 0) & (times < T)], [T])))
    points = [0.0]
    while points[-1] < T - 1e-12:
        t_lo = points[-1]
        ahead = candidates[candidates > t_lo + 1e-15]
        chosen = None
        for t_hi in ahead:
            if compute_kstar(times, series.energy, series.dissipation, t_lo, t_hi) <= budget:
                chosen = float(t_hi)
            else:
                break
        if chosen is None:
            width = float(ahead[0] - t_lo)
            raise PartitionError(
                f"slab rule needs a slab narrower than the sampling ({width:.3e}) at t={t_lo:.6g}"
                + ("" if width > dt_floor else f", below the floor {dt_floor:.3e}")
            )
        if chosen - t_lo < dt_floor:
            raise PartitionError(
                f"slab rule forces width {chosen - t_lo:.3e} < floor {dt_floor:.3e} at t={t_lo:.6g}"
            )
        points.append(chosen)
    return TimePartition(np.array(points))


def build_partition(T, policy, n_slabs=None, eps0=None, C=None, series=None, dt_floor=1e-4):
    """Partition factory: policy 'uniform' (n_slabs) or 'adaptive' (eps0, C, series)."""
    if policy == "uniform":
        if n_slabs is None:
            raise PartitionError("uniform policy needs n_slabs")
        return uniform_partition(T, n_slabs)
    if policy == "adaptive":
        if eps0 is None or C is None or series is None:
            raise PartitionError("adaptive policy needs eps0, C and a sampled series")
        return adaptive_partition(T, eps0, C, series, dt_floor)
    raise PartitionError(f"unknown partition policy {policy!r}")


# -- closed-form slab solutions ----------------------------------------------


def _phi(x):
    """(1 - exp(-x))/x, the average of the decay factor; stable near zero."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    nz = x > 1e-12
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    small = ~nz
    out[small] = 1.0 - x[small] / 2.0
    return out


def _psi(x):
    """(x - 1 + exp(-x))/x^2, the Duhamel average weight; stable near zero."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    big = x > 1e-3
    xb = x[big]
    out[big] = (xb + np.expm1(-xb)) / xb**2
    xs = x[~big]
    out[~big] = 0.5 - xs / 6.0 + xs**2 / 24.0 - xs**3 / 120.0
    return out


@dataclass
class SlabAverages:
    omega_bar: np.ndarray
    u_bar: np.ndarray


@dataclass
class PicardDiagnostics:
    iterations: int
    changes: list = field(default_factory=list)  # d_j = |avg_j - avg_{j-1}|_L2
    ratios: list = field(default_factory=list)  # rho_j = d_j / d_{j-1}
    converged: bool = False
    delta_star: float | None = None
    delta_threshold: float | None = None

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0


@dataclass
class SlabSolution:
    """Closed-form trajectory over one slab: decay of the initial state plus
    the Duhamel response to the constant forcing."""

    grid: Grid
    index: int
    t_lo: float
    t_hi: float
    nu: float
    omega_init: np.ndarray
    forcing: np.ndarray
    averages: SlabAverages | None = None
    diagnostics: PicardDiagnostics | None = None

    @property
    def width(self):
        return self.t_hi - self.t_lo

    def at(self, t):
        tau = t - self.t_lo
        if tau < -1e-12 or tau > self.width + 1e-12:
            raise ValueError(f"time {t} outside slab [{self.t_lo}, {self.t_hi}]")
        tau = min(max(tau, 0.0), self.width)
        a = self.nu * self.grid.ksq
        decay = np.exp(-a * tau)
        duhamel = tau * _phi(a * tau)  # (1 - exp(-a tau))/a, finite at k=0
        return decay * self.omega_init + duhamel * self.forcing

    def endpoint(self):
        return self.at(self.t_hi)

    def average(self):
        """Exact time average over the slab, per mode."""
        a = self.nu * self.grid.ksq
        x = a * self.width
        avg_decay = _phi(x)
        avg_duhamel = self.width * _psi(x)  # (dt - (1-exp(-x))/a)/x, finite at k=0
        return avg_decay * self.omega_init + avg_duhamel * self.forcing


def slab_forcing(grid: Grid, averages: SlabAverages):
    """Constant forcing -(ubar.grad) wbar + (wbar.grad) ubar, projected and dealiased."""
    from vslab.reference import _nonlinear_physical

    rhs = grid.to_spectral(_nonlinear_physical(grid, averages.u_bar, averages.omega_bar))
    rhs = grid.leray_project(grid.dealias(rhs))
    rhs[:, 0, 0, 0] = 0.0
    return rhs


def linear_slab_solve(grid, omega_init, averages, t_lo, t_hi, nu, index=0):
    """Solve the frozen-coefficient slab problem in closed form."""
    if t_hi <= t_lo:
        raise ValueError("slab must have positive width")
    return SlabSolution(
        grid=grid,
        index=index,
        t_lo=t_lo,
        t_hi=t_hi,
        nu=nu,
        omega_init=omega_init,
        forcing=slab_forcing(grid, averages),
        averages=averages,
    )


def slab_average(solution: SlabSolution):
    return solution.average()


# -- velocity providers --------------------------------------------------------


class SelfConsistentVelocity:
    """Close the loop internally: ubar is the Biot-Savart velocity of wbar."""

    name = "self-consistent"

    def seed_velocity(self, grid, omega_init, t_lo):
        return grid.biot_savart(omega_init)

    def velocity_for(self, grid, omega_bar, t_lo, t_hi):
        return grid.biot_savart(omega_bar)

    def velocity_at(self, grid, solution, t):
        return grid.biot_savart(solution.at(t))


class ReferenceVelocity:
    """Take ubar from a precomputed reference vorticity trajectory."""

    name = "reference"

    def __init__(self, trajectory: Trajectory):
        self.trajectory = trajectory
        self._cache = {}

    def seed_velocity(self, grid, omega_init, t_lo):
        return grid.biot_savart(self.trajectory.field_at(t_lo))

    def velocity_for(self, grid, omega_bar, t_lo, t_hi):
        key = (t_lo, t_hi)
        if key not in self._cache:
            self._cache[key] = self.trajectory.velocity_average_over(t_lo, t_hi)
        return self._cache[key]

    def velocity_at(self, grid, solution, t):
        return self.trajectory.velocity_at(t)


def make_provider(name, trajectory=None):
    if name == "self-consistent":
        return SelfConsistentVelocity()
    if name == "reference":
        if trajectory is None:
            raise ValueError("reference provider needs a reference trajectory")
        return ReferenceVelocity(trajectory)
    raise ValueError(f"unknown velocity provider {name!r}")


# -- Picard loop ----------------------------------------------------------------


def picard_solve_slab(
    grid: Grid,
    omega_init,
    provider,
    t_lo,
    t_hi,
    nu=1.0,
    tol=1e-10,
    max_iter=64,
    index=0,
    small_mode_diagnostic=False,
    enforce_threshold=False,
):
    """Fixed point of averages -> linear solve -> re-average on one slab.

    Iterate zero freezes the slab-start state: wbar <- omega_init and ubar
    from the provider at t_lo.  Convergence is declared when the L2 change of
    wbar drops below ``tol``; the change norms and their ratios are recorded
    verbatim.  With ``small_mode_diagnostic`` (grids up to 8^3) the row-sum
    contraction bound of the coefficient ODE system is evaluated at the
    converged averages.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    diag = PicardDiagnostics(iterations=0)
    omega_bar = np.array(omega_init, dtype=np.complex128)
    u_bar = provider.seed_velocity(grid, omega_init, t_lo)
    for _ in range(max_iter):
        diag.iterations += 1
        solution = linear_slab_solve(
            grid, omega_init, SlabAverages(omega_bar, u_bar), t_lo, t_hi, nu, index
        )
        new_bar = solution.average()
        d = float(np.sqrt(grid.l2sq(new_bar - omega_bar)))
        if diag.changes:
            last = diag.changes[-1]
            diag.ratios.append(d / last if last > 0.0 else 0.0)
        diag.changes.append(d)
        omega_bar = new_bar
        u_bar = provider.velocity_for(grid, omega_bar, t_lo, t_hi)
        if d <= tol:
            diag.converged = True
            break
    if not diag.converged:
        raise PicardError(index, diag)
    averages = SlabAverages(omega_bar, u_bar)
    if small_mode_diagnostic:
        diag.delta_star, diag.delta_threshold = contraction_diagnostic(grid, averages, nu)
        if enforce_threshold and (t_hi - t_lo) > diag.delta_threshold:
            raise PartitionError(
                f"slab width {t_hi - t_lo:.3e} exceeds contraction threshold "
                f"{diag.delta_threshold:.3e}"
            )
    final = linear_slab_solve(grid, omega_init, averages, t_lo, t_hi, nu, index)
    final.diagnostics = diag
    return final


# -- whole-run driver -------------------------------------------------------------


@dataclass
class SlabRecord:
    index: int
    t_lo: float
    t_hi: float
    width: float
    iterations: int
    max_ratio: float
    kstar: float
    delta_star: float | None = None


@dataclass
class SlabRunResult:
    trajectory: Trajectory
    partition: TimePartition
    solutions: list
    records: list
    provider_name: str


def run_slab_scheme(
    grid: Grid,
    omega0,
    partition: TimePartition,
    provider,
    nu=1.0,
    tol=1e-10,
    max_iter=64,
    slab_samples=16,
    small_mode_diagnostic=False,
):
    """Chain the slabs over (0,T), sampling the closed-form trajectory.

    Each slab starts from the exact endpoint array of the previous one.  Per
    slab the record carries the Picard iteration count, the worst measured
    contraction ratio, and the slab load kstar computed from the provider's
    velocity on the sample points.
    """
    if slab_samples < 2:
        raise ValueError("need at least two samples per slab")
    w = np.array(omega0, dtype=np.complex128)
    times = [0.0]
    fields = [w.copy()]
    solutions = []
    records = []
    for k, t_lo, t_hi in partition:
        sol = picard_solve_slab(
            grid,
            w,
            provider,
            t_lo,
            t_hi,
            nu=nu,
            tol=tol,
            max_iter=max_iter,
            index=k,
            small_mode_diagnostic=small_mode_diagnostic,
        )
        sample_ts = np.linspace(t_lo, t_hi, slab_samples + 1)
        u_energy = []
        u_dissipation = []
        for t in sample_ts:
            u = provider.velocity_at(grid, sol, t)
            u_energy.append(grid.l2sq(u))
            u_dissipation.append(grid.h1sq(u))
            if t > t_lo:
                times.append(float(t))
                fields.append(sol.at(t))
        kstar = compute_kstar(sample_ts, u_energy, u_dissipation, t_lo, t_hi)
        records.append(
            SlabRecord(
                index=k,
                t_lo=t_lo,
                t_hi=t_hi,
                width=t_hi - t_lo,
                iterations=sol.diagnostics.iterations,
                max_ratio=sol.diagnostics.max_ratio,
                kstar=kstar,
                delta_star=sol.diagnostics.delta_star,
            )
        )
        solutions.append(sol)
        w = sol.endpoint()
    from vslab.trajectory import series_from_samples

    traj = Trajectory(
        grid=grid,
        nu=nu,
        times=np.array(times),
        fields=fields,
        series=series_from_samples(grid, times, fields),
    )
    return SlabRunResult(
        trajectory=traj,
        partition=partition,
        solutions=solutions,
        records=records,
        provider_name=provider.name,
    )


# -- small-mode contraction diagnostic ----------------------------------------


def _retained_modes(grid: Grid):
    """Indices of the nonzero modes kept by dealiasing, the diagnostic basis."""
    idx = np.argwhere(grid.keep)
    return [tuple(i) for i in idx if not (i[0] == 0 and i[1] == 0 and i[2] == 0)]


def _polarizations(kvec):
    """Two unit vectors orthogonal to the wavevector (and to each other)."""
    k = np.asarray(kvec, dtype=np.float64)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(k)))] = 1.0
    e1 = np.cross(k, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(k, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


def _apply_averaged_transport(grid: Grid, u_bar, v):
    """Complex-linear apply of w -> -(ubar.grad) w + (w.grad) ubar at frozen ubar."""
    import scipy.fft as _f

    from vslab.spectral import _FFT_WORKERS

    n = grid.n
    scale = n**3
    up = _f.ifftn(u_bar * scale, axes=(-3, -2, -1), workers=_FFT_WORKERS).real
    dup = np.empty((3, 3, n, n, n))
    for j in range(3):
        dup[j] = _f.ifftn(1j * grid.kd[j] * u_bar * scale, axes=(-3, -2, -1), workers=_FFT_WORKERS).real
    vp = _f.ifftn(v * scale, axes=(-3, -2, -1), workers=_FFT_WORKERS)
    dvp = np.empty((3, 3, n, n, n), dtype=np.complex128)
    for j in range(3):
        dvp[j] = _f.ifftn(1j * grid.kd[j] * v * scale, axes=(-3, -2, -1), workers=_FFT_WORKERS)
    out = np.empty((3, n, n, n), dtype=np.complex128)
    for i in range(3):
        out[i] = (
            vp[0] * dup[0, i]
            + vp[1] * dup[1, i]
            + vp[2] * dup[2, i]
            - up[0] * dvp[0, i]
            - up[1] * dvp[1, i]
            - up[2] * dvp[2, i]
        )
    col = _f.fftn(out, axes=(-3, -2, -1), workers=_FFT_WORKERS) / scale
    col = grid.leray_project(grid.dealias(col))
    col[:, 0, 0, 0] = 0.0
    return col


def coupling_row_sums(grid: Grid, averages: SlabAverages, nu: float):
    """Row data of the coefficient ODE system in the divergence-free mode basis.

    Basis elements are e_p(k) exp(i k.x) for the retained nonzero modes k
    with the two polarizations p orthogonal to k.  Diffusion is diagonal with
    coefficient nu |k|^2; the averaged transport/stretching operator at
    frozen ubar fills the coupling block, whose absolute row sums are
    accumulated column by column.  Quadratic cost in the mode count: callers
    must keep the grid tiny.
    """
    if grid.n > 8:
        raise ValueError("row-sum diagnostic is restricted to grids up to 8^3")
    modes = _retained_modes(grid)
    m_count = len(modes)
    pick = tuple(np.array([idx[d] for idx in modes]) for d in range(3))
    pol = np.empty((2, 3, m_count))
    for m, idx in enumerate(modes):
        kvec = grid.k[:, idx[0], idx[1], idx[2]]
        pol[0, :, m], pol[1, :, m] = _polarizations(kvec)
    beta_rows = np.zeros(2 * m_count)
    basis = np.zeros((3, grid.n, grid.n, grid.n), dtype=np.complex128)
    for m, idx in enumerate(modes):
        for p in range(2):
            basis[:] = 0.0
            basis[(slice(None),) + idx] = pol[p, :, m]
            col = _apply_averaged_transport(grid, averages.u_bar, basis)
            picked = np.stack([col[c][pick] for c in range(3)])  # (3, m_count)
            for pp in range(2):
                beta_rows[pp * m_count : (pp + 1) * m_count] += np.abs(
                    np.sum(pol[pp] * picked, axis=0)
                )
    alpha_rows = np.tile(nu * grid.ksq[pick], 2)
    return alpha_rows, beta_rows


def contraction_diagnostic(grid: Grid, averages: SlabAverages, nu: float):
    """(delta_star, delta): the printed contraction factor and slab-width rule.

    delta_star = max_row(|alpha|+|beta|) / max_row(|alpha|+2|beta|) and
    delta = 1 / max_row(|alpha|+|beta|).  When the coupling block vanishes
    the ratio degenerates to 1; callers should treat that case separately.
    """
    alpha_rows, beta_rows = coupling_row_sums(grid, averages, nu)
    num = float(np.max(alpha_rows + beta_rows))
    den = float(np.max(alpha_rows + 2.0 * beta_rows))
    if den == 0.0:
        return 1.0, float("inf")
    return num / den, 1.0 / num if num > 0 else float("inf")

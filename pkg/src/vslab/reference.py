"""Direct pseudo-spectral integration of the vorticity transport equation.

The evolved unknown is the spectral vorticity w with velocity recovered by
Biot-Savart inversion each evaluation.  The nonlinear right-hand side is the
convective form

    N(w) = -(u . grad) w + (w . grad) u

computed through physical space with 2/3-rule dealiasing, Leray projection,
and a pinned zero mean.  Diffusion is handled exactly per mode by the
integrating factor exp(-nu |k|^2 t) inside a classical four-stage
Runge-Kutta step, so a pure-diffusion problem is advanced exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from vslab.spectral import Grid, _FFT_WORKERS
from vslab.trajectory import ScalarSeries, Trajectory, scalar_record


@dataclass
class StepperConfig:
    dt: float
    nu: float = 1.0
    enstrophy_ceiling: float = 1e8

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")


class BlowUpError(RuntimeError):
    """Integration aborted: NaN/Inf coefficients or enstrophy past the ceiling."""

    def __init__(self, time, enstrophy):
        self.time = time
        self.enstrophy = enstrophy
        super().__init__(f"blow-up at t={time:.6g}: enstrophy={enstrophy:.6g}")


def _nonlinear_physical(grid: Grid, u, w):
    """(w . grad) u - (u . grad) w evaluated pointwise, returned in physical space."""
    n = grid.n
    scale = float(n**3)
    stack = np.empty((24, n, n, n), dtype=np.complex128)
    np.multiply(u, scale, out=stack[0:3])
    np.multiply(w, scale, out=stack[3:6])
    ikd = grid.ikd_scaled(scale)
    for j in range(3):  # derivative columns d/dx_j
        np.multiply(ikd[j], u, out=stack[6 + 3 * j : 9 + 3 * j])
        np.multiply(ikd[j], w, out=stack[15 + 3 * j : 18 + 3 * j])
    phys = _fft.ifftn(stack, axes=(-3, -2, -1), workers=_FFT_WORKERS, overwrite_x=True).real
    up, wp = phys[0:3], phys[3:6]
    du = phys[6:15].reshape(3, 3, n, n, n)  # du[j, i] = d u_i / d x_j
    dw = phys[15:24].reshape(3, 3, n, n, n)
    out = np.einsum("jxyz,jixyz->ixyz", wp, du)
    out -= np.einsum("jxyz,jixyz->ixyz", up, dw)
    return out


def vorticity_rhs(grid: Grid, w):
    """Projected, dealiased nonlinear term of the vorticity equation.

    Diffusion is excluded; the stepper applies it through the integrating
    factor.  The k=0 amplitude is pinned to zero so the mean vorticity is
    conserved exactly.
    """
    u = grid.biot_savart(w)
    rhs = grid.to_spectral(_nonlinear_physical(grid, u, w))
    rhs = grid.leray_project(grid.dealias(rhs))
    rhs[:, 0, 0, 0] = 0.0
    return rhs


def velocity_rhs(grid: Grid, u):
    """Projected, dealiased -(u . grad) u for the velocity-form cross-check."""
    n = grid.n
    stack = np.empty((12, n, n, n), dtype=np.complex128)
    stack[0:3] = u
    for j in range(3):
        stack[3 + 3 * j : 6 + 3 * j] = 1j * grid.kd[j] * u
    phys = _fft.ifftn(stack * n**3, axes=(-3, -2, -1), workers=_FFT_WORKERS).real
    up = phys[0:3]
    du = phys[3:12].reshape(3, 3, n, n, n)
    out = np.empty((3, n, n, n))
    for i in range(3):
        out[i] = -(up[0] * du[0, i] + up[1] * du[1, i] + up[2] * du[2, i])
    rhs = grid.to_spectral(out)
    rhs = grid.leray_project(grid.dealias(rhs))
    rhs[:, 0, 0, 0] = 0.0
    return rhs


def rk4_step(grid: Grid, w, cfg: StepperConfig, rhs=vorticity_rhs, t=0.0):
    """One integrating-factor RK4 step; restores the state invariants after."""
    dt, nu = cfg.dt, cfg.nu
    e_half = np.exp(-0.5 * nu * dt * grid.ksq)
    e_full = e_half * e_half
    k1 = rhs(grid, w)
    k2 = rhs(grid, e_half * (w + 0.5 * dt * k1))
    k3 = rhs(grid, e_half * w + 0.5 * dt * k2)
    k4 = rhs(grid, e_full * w + dt * e_half * k3)
    out = e_full * w + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    out = grid.leray_project(grid.dealias(out))
    out[:, 0, 0, 0] = 0.0
    out = grid.symmetrize(out)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(t + dt, float("nan"))
    enstrophy = grid.l2sq(out)
    if enstrophy > cfg.enstrophy_ceiling:
        raise BlowUpError(t + dt, enstrophy)
    return out


def run_reference(
    grid: Grid,
    w0,
    T: float,
    cfg: StepperConfig,
    scalar_every: int = 1,
    field_every: int = 10,
    sample_times=None,
    rhs=vorticity_rhs,
) -> Trajectory:
    """Integrate to time T and record norm series plus field snapshots.

    The step count is round(T/dt) with the step size nudged so the run lands
    on T exactly.  Snapshots are taken every ``field_every`` steps, or, when
    ``sample_times`` is given, at the steps nearest the requested times;
    t=0 and t=T are always included.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = max(1, int(round(T / cfg.dt)))
    dt = T / n_steps
    cfg = StepperConfig(dt=dt, nu=cfg.nu, enstrophy_ceiling=cfg.enstrophy_ceiling)
    snap_steps = None
    if sample_times is not None:
        snap_steps = {min(n_steps, max(0, int(round(t / dt)))) for t in sample_times}

    w = grid.symmetrize(grid.leray_project(np.array(w0, dtype=np.complex128)))
    w[:, 0, 0, 0] = 0.0

    times = [0.0]
    fields = [w.copy()]
    s_times = [0.0]
    s_rows = [scalar_record(grid, w)]
    for step in range(1, n_steps + 1):
        t_prev = (step - 1) * dt
        w = rk4_step(grid, w, cfg, rhs=rhs, t=t_prev)
        t = step * dt if step < n_steps else T
        if step % scalar_every == 0 or step == n_steps:
            s_times.append(t)
            s_rows.append(scalar_record(grid, w))
        want_field = (
            step in snap_steps if snap_steps is not None else step % field_every == 0
        )
        if want_field or step == n_steps:
            times.append(t)
            fields.append(w.copy())
    arr = np.array(s_rows, dtype=np.float64)
    series = ScalarSeries(
        times=np.array(s_times),
        energy=arr[:, 0],
        enstrophy=arr[:, 1],
        dissipation=arr[:, 2],
        enstrophy_dissipation=arr[:, 3],
    )
    return Trajectory(grid=grid, nu=cfg.nu, times=np.array(times), fields=fields, series=series)


def run_reference_velocity(grid: Grid, u0, T: float, cfg: StepperConfig, field_every=10):
    """Velocity-form integration used only to cross-check the vorticity solver.

    Returns (times, velocity snapshots); the snapshots are spectral velocity
    amplitudes, so curl of a snapshot compares against the vorticity run.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = max(1, int(round(T / cfg.dt)))
    dt = T / n_steps
    cfg = StepperConfig(dt=dt, nu=cfg.nu, enstrophy_ceiling=cfg.enstrophy_ceiling)
    u = grid.symmetrize(grid.leray_project(np.array(u0, dtype=np.complex128)))
    u[:, 0, 0, 0] = 0.0
    times = [0.0]
    snaps = [u.copy()]
    for step in range(1, n_steps + 1):
        u = rk4_step(grid, u, cfg, rhs=velocity_rhs, t=(step - 1) * dt)
        if step % field_every == 0 or step == n_steps:
            times.append(step * dt if step < n_steps else T)
            snaps.append(u.copy())
    return np.array(times), snaps

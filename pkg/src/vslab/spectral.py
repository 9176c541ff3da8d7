"""Spectral calculus on the periodic box [0, 2pi)^3.

Fields are carried by their Fourier amplitudes: a scalar field is a complex
array of shape (n, n, n), a vector field (3, n, n, n), with wavevectors in
numpy ``fftfreq`` ordering and the normalization

    f(x) = sum_k  fhat[k] * exp(i k.x)

so that a real field has Hermitian-symmetric amplitudes, fhat[-k] ==
conj(fhat[k]).  All differential operators act modewise and are exact for
band-limited fields.  Quadratic products go through physical space and are
kept alias-free by the 2/3 truncation rule, so the discrete counterparts of
the integration-by-parts identities used by the estimate monitors hold to
rounding error.

Conventions fixed here and relied on everywhere else:

* the box edge is 2*pi, so ``l2sq`` carries the volume factor (2*pi)**3;
* odd-derivative operators (curl, divergence, gradient) use wavenumbers
  with the Nyquist plane zeroed, which keeps them Hermitian-safe;
* norms and diffusion use the full |k|^2 including the Nyquist plane;
* the mean mode k=0 of velocities and vorticities is pinned to zero.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

TWO_PI = 2.0 * np.pi
BOX_VOLUME = TWO_PI**3

_FFT_WORKERS = 2


class FieldShapeError(ValueError):
    pass


class MeanModeError(ValueError):
    """Raised when an operation needs a zero-mean field and gets one with mass at k=0."""


class DivergenceError(ValueError):
    """Raised when an operation needs a divergence-free field beyond tolerance."""


class Grid:
    """Cubic periodic grid with n modes per axis and the operator tables on it."""

    def __init__(self, n: int):
        if n < 4 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 4, got {n}")
        self.n = int(n)
        k1 = np.fft.fftfreq(n, d=1.0 / n)  # integers 0..n/2-1, -n/2..-1
        self.k = np.array(np.meshgrid(k1, k1, k1, indexing="ij"))
        self.ksq = np.sum(self.k**2, axis=0)
        with np.errstate(divide="ignore"):
            inv = 1.0 / self.ksq
        inv[0, 0, 0] = 0.0
        self.inv_ksq = inv
        # derivative wavenumbers: Nyquist zeroed so i*k keeps Hermitian symmetry
        kd1 = k1.copy()
        kd1[n // 2] = 0.0
        self.kd = np.array(np.meshgrid(kd1, kd1, kd1, indexing="ij"))
        cut = n / 3.0
        self.keep = (
            (np.abs(self.k[0]) <= cut)
            & (np.abs(self.k[1]) <= cut)
            & (np.abs(self.k[2]) <= cut)
        )
        x1 = TWO_PI * np.arange(n) / n
        self.x = np.array(np.meshgrid(x1, x1, x1, indexing="ij"))
        self.cell_volume = (TWO_PI / n) ** 3
        self._ikd_cache = {}

    def ikd_scaled(self, scale):
        """Cached i * k_derivative * scale, the hot factor of the RHS evaluations."""
        if scale not in self._ikd_cache:
            self._ikd_cache[scale] = (1j * scale) * self.kd
        return self._ikd_cache[scale]

    def __repr__(self):
        return f"Grid(n={self.n})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    # -- transforms ---------------------------------------------------------

    def _check_shape(self, arr):
        n = self.n
        if arr.shape not in ((n, n, n), (3, n, n, n)):
            raise FieldShapeError(
                f"expected shape {(n, n, n)} or {(3, n, n, n)}, got {arr.shape}"
            )

    def to_spectral(self, values):
        """Forward transform of real physical samples to mode amplitudes."""
        self._check_shape(np.asarray(values))
        vals = np.asarray(values, dtype=np.float64)
        return _fft.fftn(vals, axes=(-3, -2, -1), workers=_FFT_WORKERS) / self.n**3

    def to_physical(self, coeffs):
        """Inverse transform; returns the real part of the synthesized field."""
        self._check_shape(coeffs)
        out = _fft.ifftn(coeffs * self.n**3, axes=(-3, -2, -1), workers=_FFT_WORKERS)
        return out.real

    # -- symmetry helpers ----------------------------------------------------

    def conjugate_reflection(self, coeffs):
        """Amplitudes of the conjugate-reflected field, index k -> -k."""
        rev = np.flip(coeffs, axis=(-3, -2, -1))
        return np.conj(np.roll(rev, 1, axis=(-3, -2, -1)))

    def hermitian_defect(self, coeffs):
        """Max |fhat[k] - conj(fhat[-k])|, zero for a real field."""
        return float(np.max(np.abs(coeffs - self.conjugate_reflection(coeffs))))

    def symmetrize(self, coeffs):
        return 0.5 * (coeffs + self.conjugate_reflection(coeffs))

    # -- differential operators ----------------------------------------------

    def gradient(self, s):
        """Scalar -> vector, modewise i*k*shat."""
        self._check_shape(s)
        return 1j * self.kd * s[np.newaxis]

    def divergence(self, v):
        """Vector -> scalar, modewise i*k.vhat."""
        self._check_shape(v)
        return 1j * (self.kd[0] * v[0] + self.kd[1] * v[1] + self.kd[2] * v[2])

    def curl(self, v):
        """Vector -> vector, modewise i*k x vhat."""
        self._check_shape(v)
        kd = self.kd
        return 1j * np.stack(
            [
                kd[1] * v[2] - kd[2] * v[1],
                kd[2] * v[0] - kd[0] * v[2],
                kd[0] * v[1] - kd[1] * v[0],
            ]
        )

    def leray_project(self, v):
        """Remove the gradient part: vhat - k (k.vhat)/|k|^2, identity at k=0."""
        self._check_shape(v)
        kdotv = self.k[0] * v[0] + self.k[1] * v[1] + self.k[2] * v[2]
        return v - self.k * (kdotv * self.inv_ksq)[np.newaxis]

    def divergence_rel(self, v):
        """Dimensionless divergence residual |k.vhat| / |k||vhat| in L2."""
        num = np.sum(np.abs(self.divergence(v)) ** 2)
        den = np.sum(self.ksq * np.sum(np.abs(v) ** 2, axis=0))
        if den == 0.0:
            return 0.0
        return float(np.sqrt(num / den))

    def biot_savart(self, w, div_tol=1e-8, mean_tol=1e-13):
        """Velocity with curl u = w: uhat = i k x what / |k|^2, zero mean.

        Requires zero mean vorticity (no periodic vector potential exists
        otherwise) and divergence below ``div_tol`` relative to |k||what|.
        """
        self._check_shape(w)
        scale = float(np.max(np.abs(w)))
        mean = float(np.max(np.abs(w[:, 0, 0, 0])))
        if mean > mean_tol * max(scale, 1.0):
            raise MeanModeError(f"mean vorticity {mean:.3e} is not zero")
        rel = self.divergence_rel(w)
        if rel > div_tol:
            raise DivergenceError(f"relative divergence {rel:.3e} exceeds {div_tol:.1e}")
        return self.curl(w) * self.inv_ksq[np.newaxis]

    def dealias(self, coeffs):
        """Zero every mode with any |k_i| > n/3 (2/3 rule)."""
        self._check_shape(coeffs)
        return coeffs * self.keep

    # -- norms ----------------------------------------------------------------

    def l2sq(self, coeffs):
        """Squared L2 norm over the box, components summed (Parseval)."""
        self._check_shape(coeffs)
        return BOX_VOLUME * float(np.sum(np.abs(coeffs) ** 2))

    def h1sq(self, coeffs):
        """Squared L2 norm of the gradient, components summed."""
        self._check_shape(coeffs)
        if coeffs.ndim == 4:
            return BOX_VOLUME * float(np.sum(self.ksq * np.sum(np.abs(coeffs) ** 2, axis=0)))
        return BOX_VOLUME * float(np.sum(self.ksq * np.abs(coeffs) ** 2))

    def l4(self, coeffs):
        """L4 norm of |field| evaluated on the physical grid quadrature."""
        phys = self.to_physical(coeffs)
        if phys.ndim == 4:
            mag_sq = np.sum(phys**2, axis=0)
        else:
            mag_sq = phys**2
        return float((np.sum(mag_sq**2) * self.cell_volume) ** 0.25)

    def norm_suite(self, coeffs):
        return {
            "l2_sq": self.l2sq(coeffs),
            "h1_semi_sq": self.h1sq(coeffs),
            "l4": self.l4(coeffs),
        }

    def physical_l2sq(self, values):
        """Direct physical-space L2 quadrature, for Parseval cross-checks."""
        vals = np.asarray(values, dtype=np.float64)
        return float(np.sum(vals**2) * self.cell_volume)


# -- canonical initial fields ----------------------------------------------


def taylor_green_velocity(grid: Grid):
    """Classic Taylor-Green vortex velocity, amplitude 1."""
    x1, x2, x3 = grid.x
    u = np.stack(
        [
            np.sin(x1) * np.cos(x2) * np.cos(x3),
            -np.cos(x1) * np.sin(x2) * np.cos(x3),
            np.zeros_like(x1),
        ]
    )
    return grid.to_spectral(u)


def taylor_green_vorticity(grid: Grid):
    return grid.curl(taylor_green_velocity(grid))


def abc_velocity(grid: Grid, a=1.0, b=1.0, c=1.0):
    """ABC flow: an eigenfield of curl with eigenvalue 1 (Beltrami)."""
    x1, x2, x3 = grid.x
    u = np.stack(
        [
            a * np.sin(x3) + c * np.cos(x2),
            b * np.sin(x1) + a * np.cos(x3),
            c * np.sin(x2) + b * np.cos(x1),
        ]
    )
    return grid.to_spectral(u)


def abc_vorticity(grid: Grid, a=1.0, b=1.0, c=1.0):
    # curl u = u for the ABC family, so the vorticity shares the amplitudes
    return grid.curl(abc_velocity(grid, a, b, c))


# -- deterministic random fields --------------------------------------------

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, count: int):
    """First ``count`` outputs of the splitmix64 stream seeded with ``seed``."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _SM64_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _SM64_M1
        z = (z ^ (z >> np.uint64(27))) * _SM64_M2
        z = z ^ (z >> np.uint64(31))
    return z


def splitmix64_uniform(seed: int, count: int):
    """Uniform [0,1) doubles derived from the top 53 bits of splitmix64."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def random_divfree_field(grid: Grid, seed: int, kmax: int | None = None):
    """Seeded divergence-free zero-mean vector field of unit L2 norm.

    Amplitudes are drawn mode by mode in lexicographic wavevector order from
    the splitmix64 stream (six uniforms per mode: re/im for each component),
    damped by 1/(1+|k|^2), Hermitian-symmetrized, projected, and dealiased,
    so the construction is reproducible across implementations.
    """
    n = grid.n
    if kmax is None:
        kmax = int(n / 3.0)
    kmax = min(kmax, n // 2 - 1)
    axis = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    order = np.argsort(axis)
    coeffs = np.zeros((3, n, n, n), dtype=np.complex128)
    modes = []
    for i1 in order:
        if abs(axis[i1]) > kmax:
            continue
        for i2 in order:
            if abs(axis[i2]) > kmax:
                continue
            for i3 in order:
                if abs(axis[i3]) > kmax:
                    continue
                if axis[i1] == 0 and axis[i2] == 0 and axis[i3] == 0:
                    continue
                modes.append((i1, i2, i3))
    draws = splitmix64_uniform(seed, 6 * len(modes)).reshape(len(modes), 3, 2)
    amp = 2.0 * draws - 1.0
    for (i1, i2, i3), a in zip(modes, amp):
        damp = 1.0 / (1.0 + grid.ksq[i1, i2, i3])
        coeffs[:, i1, i2, i3] = damp * (a[:, 0] + 1j * a[:, 1])
    coeffs = grid.symmetrize(coeffs)
    coeffs[:, 0, 0, 0] = 0.0
    coeffs = grid.dealias(grid.leray_project(coeffs))
    norm = np.sqrt(grid.l2sq(coeffs))
    if norm == 0.0:
        raise ValueError("degenerate random field")
    return coeffs / norm


_INITIAL_BUILDERS = {
    "taylor-green": taylor_green_vorticity,
    "abc-beltrami": abc_vorticity,
}


def initial_vorticity(grid: Grid, name: str, seed: int = 0):
    """Vorticity initial condition by registry name."""
    if name in _INITIAL_BUILDERS:
        return _INITIAL_BUILDERS[name](grid)
    if name == "random-divfree":
        return random_divfree_field(grid, seed)
    raise ValueError(f"unknown initial condition {name!r}")

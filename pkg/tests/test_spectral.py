"""Spectral core: transforms, operators, norms, and their invariants."""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from vslab.spectral import (
    BOX_VOLUME,
    DivergenceError,
    Grid,
    MeanModeError,
    abc_velocity,
    abc_vorticity,
    random_divfree_field,
    splitmix64,
    splitmix64_uniform,
    taylor_green_velocity,
    taylor_green_vorticity,
)

TWO_PI = 2.0 * np.pi


# -- oracles -------------------------------------------------------------------


def naive_dft(vals):
    """O(N^2) summation DFT with the package's amplitude normalization."""
    n = vals.shape[0]
    ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    out = np.zeros((n, n, n), dtype=complex)
    idx = np.arange(n)
    for a, k1 in enumerate(ks):
        for b, k2 in enumerate(ks):
            for c, k3 in enumerate(ks):
                phase = np.exp(
                    -2j
                    * np.pi
                    * (
                        k1 * idx[:, None, None]
                        + k2 * idx[None, :, None]
                        + k3 * idx[None, None, :]
                    )
                    / n
                )
                out[a, b, c] = np.sum(vals * phase) / n**3
    return out


def padded_product(grid, a_coeffs, b_coeffs):
    """Alias-free pointwise product via 3/2 zero padding, back on the base grid."""
    n = grid.n
    m = 3 * n // 2
    big = Grid(m)

    def embed(coeffs):
        out = np.zeros((m, m, m), dtype=complex)
        ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        for a, k1 in enumerate(ks):
            for b, k2 in enumerate(ks):
                for c, k3 in enumerate(ks):
                    out[k1 % m, k2 % m, k3 % m] = coeffs[a, b, c]
        return out

    prod = big.to_spectral(big.to_physical(embed(a_coeffs)) * big.to_physical(embed(b_coeffs)))
    ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    out = np.zeros((n, n, n), dtype=complex)
    for a, k1 in enumerate(ks):
        for b, k2 in enumerate(ks):
            for c, k3 in enumerate(ks):
                out[a, b, c] = prod[k1 % m, k2 % m, k3 % m]
    return out


# -- grid ------------------------------------------------------------------------


@pytest.mark.parametrize("bad", [3, 5, 7, 2, 0, -4])
def test_grid_rejects_bad_sizes(bad):
    with pytest.raises(ValueError):
        Grid(bad)


def test_wavevectors_are_pure_function_of_n(grid8):
    again = Grid(8)
    assert np.array_equal(again.k, grid8.k)
    assert np.array_equal(again.keep, grid8.keep)


# -- transforms -------------------------------------------------------------------


def test_transform_zero_field(grid8):
    zero = np.zeros((8, 8, 8))
    assert np.all(grid8.to_spectral(zero) == 0.0)


def test_transform_single_mode_amplitudes(grid8):
    coeffs = grid8.to_spectral(np.sin(grid8.x[0]))
    assert coeffs[1, 0, 0] == pytest.approx(-0.5j, abs=1e-14)
    assert coeffs[-1, 0, 0] == pytest.approx(0.5j, abs=1e-14)
    mask = np.ones_like(coeffs, dtype=bool)
    mask[1, 0, 0] = mask[-1, 0, 0] = False
    assert np.max(np.abs(coeffs[mask])) < 1e-14


def test_transform_matches_naive_dft(grid4):
    vals = splitmix64_uniform(2024, 4**3).reshape(4, 4, 4) - 0.5
    got = grid4.to_spectral(vals)
    want = naive_dft(vals)
    assert np.max(np.abs(got - want)) < 1e-12
    assert np.max(np.abs(grid4.to_physical(got) - vals)) < 1e-12


def test_transform_round_trip_relative(grid8):
    vals = splitmix64_uniform(99, 8**3).reshape(8, 8, 8) - 0.5
    back = grid8.to_physical(grid8.to_spectral(vals))
    assert np.max(np.abs(back - vals)) / np.max(np.abs(vals)) < 1e-12


def test_transform_shape_mismatch(grid8):
    with pytest.raises(ValueError):
        grid8.to_spectral(np.zeros((4, 4, 4)))


# -- curl --------------------------------------------------------------------------


def test_curl_single_mode(grid8):
    v = np.zeros((3, 8, 8, 8))
    v[2] = np.sin(grid8.x[0])
    got = grid8.to_physical(grid8.curl(grid8.to_spectral(v)))
    want = np.zeros_like(v)
    want[1] = -np.cos(grid8.x[0])
    assert np.max(np.abs(got - want)) < 1e-13


def test_curl_of_gradient_vanishes(grid8):
    s = grid8.to_spectral(np.sin(grid8.x[0]) * np.sin(grid8.x[1]))
    assert np.max(np.abs(grid8.curl(grid8.gradient(s)))) < 1e-14


def test_curl_taylor_green_symbolic_oracle(grid16):
    x1, x2, x3 = sp.symbols("x1 x2 x3")
    u_sym = (
        sp.sin(x1) * sp.cos(x2) * sp.cos(x3),
        -sp.cos(x1) * sp.sin(x2) * sp.cos(x3),
        sp.Integer(0),
    )
    curl_sym = (
        sp.diff(u_sym[2], x2) - sp.diff(u_sym[1], x3),
        sp.diff(u_sym[0], x3) - sp.diff(u_sym[2], x1),
        sp.diff(u_sym[1], x1) - sp.diff(u_sym[0], x2),
    )
    fns = [sp.lambdify((x1, x2, x3), expr, "numpy") for expr in curl_sym]
    want = np.stack([np.broadcast_to(f(*grid16.x), grid16.x[0].shape) for f in fns])
    got = grid16.to_physical(grid16.curl(taylor_green_velocity(grid16)))
    assert np.max(np.abs(got - want)) < 1e-12


# -- divergence ----------------------------------------------------------------------


def test_divergence_single_mode(grid8):
    v = np.zeros((3, 8, 8, 8))
    v[0] = np.sin(grid8.x[0])
    got = grid8.to_physical(grid8.divergence(grid8.to_spectral(v)))
    assert np.max(np.abs(got - np.cos(grid8.x[0]))) < 1e-13


def test_divergence_of_curl_vanishes(grid8):
    v = random_divfree_field(grid8, seed=3) + 0.3 * grid8.gradient(
        grid8.to_spectral(np.sin(grid8.x[1]))
    )
    assert np.max(np.abs(grid8.divergence(grid8.curl(v)))) < 1e-14


def test_divergence_matches_modewise_loop(grid4):
    v = random_divfree_field(grid4, seed=5) + 0.2 * grid4.gradient(
        grid4.to_spectral(np.sin(grid4.x[0]))
    )
    got = grid4.divergence(v)
    want = np.zeros_like(got)
    ks = np.fft.fftfreq(4, d=1.0 / 4).astype(int)
    kd = [0 if abs(k) == 2 else k for k in ks]
    for a in range(4):
        for b in range(4):
            for c in range(4):
                want[a, b, c] = 1j * (
                    kd[a] * v[0, a, b, c] + kd[b] * v[1, a, b, c] + kd[c] * v[2, a, b, c]
                )
    assert np.max(np.abs(got - want)) < 1e-14


# -- Leray projection -------------------------------------------------------------------


def test_leray_keeps_divergence_free_fields(grid8):
    v = random_divfree_field(grid8, seed=11)
    assert np.max(np.abs(grid8.leray_project(v) - v)) < 1e-14


def test_leray_kills_gradients(grid8):
    v = grid8.gradient(grid8.to_spectral(np.sin(grid8.x[0])))
    assert np.max(np.abs(grid8.leray_project(v))) < 1e-14


def test_leray_mixed_field_structure(grid8):
    v = random_divfree_field(grid8, seed=13) + grid8.gradient(
        grid8.to_spectral(np.sin(grid8.x[0]) * np.cos(grid8.x[2]))
    )
    proj = grid8.leray_project(v)
    assert grid8.divergence_rel(proj) < 1e-12
    residue = v - proj
    cross = grid8.curl(residue)  # gradient fields are curl-free modewise
    assert np.max(np.abs(cross)) < 1e-13


def test_leray_idempotent(grid8):
    v = random_divfree_field(grid8, seed=17) + grid8.gradient(
        grid8.to_spectral(np.cos(grid8.x[1]))
    )
    once = grid8.leray_project(v)
    twice = grid8.leray_project(once)
    assert np.max(np.abs(twice - once)) < 1e-14


# -- Biot-Savart -------------------------------------------------------------------------


def test_biot_savart_zero(grid8):
    assert np.all(grid8.biot_savart(np.zeros((3, 8, 8, 8), dtype=complex)) == 0.0)


def test_biot_savart_single_mode(grid8):
    w = np.zeros((3, 8, 8, 8))
    w[1] = -np.cos(grid8.x[0])
    got = grid8.to_physical(grid8.biot_savart(grid8.to_spectral(w)))
    want = np.zeros_like(w)
    want[2] = np.sin(grid8.x[0])
    assert np.max(np.abs(got - want)) < 1e-13


def test_biot_savart_round_trip(grid8):
    w = random_divfree_field(grid8, seed=23)
    u = grid8.biot_savart(w)
    assert grid8.divergence_rel(u) < 1e-12
    assert np.max(np.abs(u[:, 0, 0, 0])) == 0.0
    rel = np.sqrt(grid8.l2sq(grid8.curl(u) - w) / grid8.l2sq(w))
    assert rel < 1e-12


def test_biot_savart_rejects_mean_vorticity(grid8):
    w = random_divfree_field(grid8, seed=29).copy()
    w[0, 0, 0, 0] = 0.1
    with pytest.raises(MeanModeError):
        grid8.biot_savart(w)


def test_biot_savart_rejects_divergent_input(grid8):
    w = grid8.gradient(grid8.to_spectral(np.sin(grid8.x[0])))
    with pytest.raises(DivergenceError):
        grid8.biot_savart(w)


# -- dealiasing ----------------------------------------------------------------------------


def test_dealias_keeps_low_mode(grid8):
    c = np.zeros((8, 8, 8), dtype=complex)
    c[1, 0, 0] = 1.0 - 2.0j
    assert np.array_equal(grid8.dealias(c), c)


def test_dealias_zeroes_nyquist(grid8):
    c = np.zeros((8, 8, 8), dtype=complex)
    c[4, 0, 0] = 3.0
    assert np.all(grid8.dealias(c) == 0.0)


def test_dealias_pipeline_matches_padded_convolution(grid8):
    a = grid8.to_spectral(np.sin(grid8.x[0]))
    product = grid8.dealias(grid8.to_spectral(grid8.to_physical(a) * grid8.to_physical(a)))
    want = grid8.dealias(padded_product(grid8, a, a))
    assert np.max(np.abs(product - want)) < 1e-12


def test_dealias_pipeline_matches_padded_convolution_generic(grid8):
    a = grid8.dealias(grid8.to_spectral(splitmix64_uniform(41, 8**3).reshape(8, 8, 8) - 0.5))
    b = grid8.dealias(grid8.to_spectral(splitmix64_uniform(43, 8**3).reshape(8, 8, 8) - 0.5))
    product = grid8.dealias(grid8.to_spectral(grid8.to_physical(a) * grid8.to_physical(b)))
    want = grid8.dealias(padded_product(grid8, a, b))
    assert np.max(np.abs(product - want)) < 1e-12


# -- norms ------------------------------------------------------------------------------------


def test_norms_single_mode(grid8):
    suite = grid8.norm_suite(grid8.to_spectral(np.sin(grid8.x[0])))
    assert suite["l2_sq"] == pytest.approx(BOX_VOLUME / 2.0, rel=1e-13)
    assert suite["h1_semi_sq"] == pytest.approx(BOX_VOLUME / 2.0, rel=1e-13)


def test_norms_constant_field(grid8):
    suite = grid8.norm_suite(grid8.to_spectral(np.ones((8, 8, 8))))
    assert suite["l4"] == pytest.approx(TWO_PI**0.75, rel=1e-13)
    assert suite["h1_semi_sq"] == pytest.approx(0.0, abs=1e-14)


def test_h1_equals_enstrophy_of_curl(grid8):
    u = grid8.biot_savart(random_divfree_field(grid8, seed=31))
    h1 = grid8.h1sq(u)
    enstrophy = grid8.l2sq(grid8.curl(u))
    assert abs(h1 - enstrophy) / h1 < 1e-12


def test_parseval(grid8):
    v = random_divfree_field(grid8, seed=37)
    phys = grid8.to_physical(v)
    assert abs(grid8.physical_l2sq(phys) - grid8.l2sq(v)) / grid8.l2sq(v) < 1e-12


# -- property tests -----------------------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32))
def test_operations_preserve_hermitian_symmetry(seed):
    grid = Grid(8)
    v = random_divfree_field(grid, seed=seed)
    for out in (
        grid.curl(v),
        grid.leray_project(v),
        grid.biot_savart(v),
        grid.dealias(v),
    ):
        assert grid.hermitian_defect(out) < 1e-13


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32))
def test_round_trip_property(seed):
    grid = Grid(8)
    vals = splitmix64_uniform(seed, 8**3).reshape(8, 8, 8) - 0.5
    back = grid.to_physical(grid.to_spectral(vals))
    assert np.max(np.abs(back - vals)) <= 1e-12 * max(1.0, np.max(np.abs(vals)))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32))
def test_curl_biot_savart_identity_property(seed):
    grid = Grid(8)
    w = random_divfree_field(grid, seed=seed)
    u = grid.biot_savart(w)
    assert np.sqrt(grid.l2sq(grid.curl(u) - w) / grid.l2sq(w)) < 1e-12


# -- deterministic generator -----------------------------------------------------------------------


def test_splitmix64_against_integer_reference():
    # independent scalar implementation in plain Python integers
    def ref_stream(seed, count):
        mask = (1 << 64) - 1
        out = []
        state = seed & mask
        for _ in range(count):
            state = (state + 0x9E3779B97F4A7C15) & mask
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
            out.append(z ^ (z >> 31))
        return out

    got = splitmix64(12345, 6)
    want = ref_stream(12345, 6)
    assert [int(v) for v in got] == want


def test_random_field_is_deterministic(grid8):
    a = random_divfree_field(grid8, seed=2)
    b = random_divfree_field(grid8, seed=2)
    c = random_divfree_field(grid8, seed=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# -- canonical fields ------------------------------------------------------------------------------


def test_taylor_green_is_divergence_free(grid16):
    u = taylor_green_velocity(grid16)
    assert grid16.divergence_rel(u) < 1e-13
    w = taylor_green_vorticity(grid16)
    assert grid16.divergence_rel(w) < 1e-13
    assert np.max(np.abs(w[:, 0, 0, 0])) == 0.0


def test_abc_flow_is_curl_eigenfield(grid16):
    u = abc_velocity(grid16)
    w = abc_vorticity(grid16)
    assert np.max(np.abs(grid16.curl(u) - u)) < 1e-13
    assert np.max(np.abs(w - u)) < 1e-13

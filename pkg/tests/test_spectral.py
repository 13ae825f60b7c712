import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fnls import spectral as sp

from conftest import random_field


# -- lattice ----------------------------------------------------------------

def test_smallest_lattice_frequencies():
    g = sp.make_grid(1, 2, 2 * math.pi)
    assert sorted(g.integer_modes[0].ravel().tolist()) == [-1, 0]
    np.testing.assert_allclose(sorted(g.frequencies[0].ravel()), [-1.0, 0.0])


def test_square_lattice_covers_symmetric_mode_range():
    g = sp.make_grid(2, 64, 2 * math.pi)
    assert g.size == 4096 and g.shape == (64, 64)
    modes = g.integer_modes
    assert modes[0].min() == -32 and modes[0].max() == 31
    assert modes[1].min() == -32 and modes[1].max() == 31


def test_frequency_spacing_on_longer_box():
    g = sp.make_grid(1, 8, 4 * math.pi)
    # xi = 2 pi m / L with L = 4 pi gives steps of one half
    assert g.frequency_spacing == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(np.diff(np.sort(g.frequencies[0].ravel())), 0.5, atol=1e-14)


@pytest.mark.parametrize("N", [8, 16, 32, 64, 128])
def test_dealias_band_is_two_thirds_rule(N):
    g = sp.make_grid(2, N, 10.0)
    assert g.band_limit == (N - 1) // 3
    kept = g.dealias_mask
    m0, m1 = g.integer_modes
    np.testing.assert_array_equal(kept, (3 * np.abs(m0) < N) & (3 * np.abs(m1) < N))


@pytest.mark.parametrize("bad", [(0, 8, 1.0), (2, 12, 1.0), (2, 8, 0.0)])
def test_grid_rejects_bad_arguments(bad):
    with pytest.raises(ValueError):
        sp.make_grid(*bad)


# -- transforms -------------------------------------------------------------

def test_constant_field_maps_to_dc_mode(grid2):
    u = sp.SpectralField(grid2, np.full(grid2.shape, 2.5 + 1j))
    hat = sp.forward_transform(u).values
    assert hat[0, 0] == pytest.approx((2.5 + 1j) * grid2.points_per_dim)
    rest = hat.copy()
    rest[0, 0] = 0
    assert np.abs(rest).max() < 1e-12


def test_plane_wave_matches_direct_transform_sum():
    g = sp.make_grid(2, 8, 3.0)
    m0 = (2, -1)
    u = sp.plane_wave(g, m0, 0.7 - 0.2j)
    hat = sp.forward_transform(u).values
    # the ortho DFT written out as an explicit double sum
    N = g.points_per_dim
    j = np.arange(N)
    direct = np.zeros((N, N), dtype=complex)
    for a in range(N):
        for b in range(N):
            kern = np.exp(-2j * np.pi * (a * j[:, None] + b * j[None, :]) / N)
            direct[a, b] = np.sum(u.values * kern) / N
    np.testing.assert_allclose(hat, direct, atol=1e-12)
    nz = np.argwhere(np.abs(hat) > 1e-10)
    assert nz.tolist() == [[2 % N, -1 % N]]


@given(st.integers(0, 2**32 - 1))
def test_transform_roundtrip_is_identity(seed):
    g = sp.make_grid(2, 16, 5.0)
    u = random_field(g, np.random.default_rng(seed))
    back = sp.inverse_transform(sp.forward_transform(u))
    np.testing.assert_allclose(back.values, u.values, atol=1e-12)


def test_transform_space_tags_enforced(grid2):
    u = sp.zeros(grid2)
    with pytest.raises(sp.SpaceTagError):
        sp.inverse_transform(u)
    with pytest.raises(sp.SpaceTagError):
        sp.forward_transform(sp.forward_transform(u))


# -- spectral operators ----------------------------------------------------

def test_fractional_laplacian_kills_constants(grid2):
    cache = sp.make_multiplier(grid2, 0.75)
    out = sp.frac_laplacian(sp.SpectralField(grid2, np.ones(grid2.shape, complex)), cache)
    assert np.abs(out.values).max() < 1e-12


def test_half_laplacian_on_plane_wave_is_modulus_of_wavevector():
    g = sp.make_grid(2, 16, 2 * math.pi)
    u = sp.plane_wave(g, (3, 4))
    out = sp.frac_laplacian(u, sp.make_multiplier(g, 0.5))
    np.testing.assert_allclose(out.values, 5.0 * u.values, atol=1e-12)


def test_alpha_one_matches_classical_laplacian():
    g = sp.make_grid(2, 16, 7.0)
    m = (2, -3)
    u = sp.plane_wave(g, m)
    out = sp.frac_laplacian(u, sp.make_multiplier(g, 1.0))
    xi2 = (2 * math.pi / 7.0) ** 2 * (4 + 9)
    # -Laplacian of exp(i xi.x) is |xi|^2 exp(i xi.x)
    np.testing.assert_allclose(out.values, xi2 * u.values, atol=1e-10)


def test_free_propagator_at_zero_time_is_identity(grid2, rng):
    u = random_field(grid2, rng)
    out = sp.free_propagator(u, 0.0, sp.make_multiplier(grid2, 0.75))
    np.testing.assert_allclose(out.values, u.values, atol=1e-12)


def test_free_propagator_single_mode_phase():
    g = sp.make_grid(2, 16, 2 * math.pi)
    u = sp.plane_wave(g, (3, 4))
    out = sp.free_propagator(u, 1.0, sp.make_multiplier(g, 0.5))
    np.testing.assert_allclose(out.values, np.exp(-5j) * u.values, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.floats(0.3, 1.0))
def test_free_propagator_preserves_norm(seed, t, alpha):
    g = sp.make_grid(2, 16, 9.0)
    u = random_field(g, np.random.default_rng(seed))
    out = sp.free_propagator(u, t, sp.make_multiplier(g, alpha))
    assert sp.l2_norm(out) == pytest.approx(sp.l2_norm(u), rel=1e-12)


def test_damped_propagator_without_damping_is_free_flow(grid2, rng):
    cache = sp.make_multiplier(grid2, 0.75)
    u = random_field(grid2, rng)
    np.testing.assert_allclose(sp.damped_propagator(u, 0.8, 0.0, cache).values,
                               sp.free_propagator(u, 0.8, cache).values, atol=1e-12)


def test_damped_propagator_scales_norm(grid2, rng):
    cache = sp.make_multiplier(grid2, 0.75)
    u = random_field(grid2, rng)
    out = sp.damped_propagator(u, 1.0, 0.5, cache)
    assert sp.l2_norm(out) == pytest.approx(math.exp(-0.5) * sp.l2_norm(u), rel=1e-12)
    assert sp.l2_norm(sp.damped_propagator(sp.zeros(grid2), 1.0, 0.5, cache)) == 0.0


def test_damped_propagator_rejects_negative_arguments(grid2):
    cache = sp.make_multiplier(grid2, 0.75)
    with pytest.raises(ValueError):
        sp.damped_propagator(sp.zeros(grid2), -1.0, 0.1, cache)
    with pytest.raises(ValueError):
        sp.damped_propagator(sp.zeros(grid2), 1.0, -0.1, cache)


def test_operator_grid_mismatch(grid2):
    other = sp.make_multiplier(sp.make_grid(2, 16, 20.0), 0.75)
    with pytest.raises(sp.GridMismatchError):
        sp.frac_laplacian(sp.zeros(grid2), other)


# -- norms ------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 4.5])
def test_lp_norm_of_constant_field(p):
    g = sp.make_grid(2, 16, 3.0)
    c = 1.5 - 2j
    val = sp.lp_norm(sp.SpectralField(g, np.full(g.shape, c)), p)
    assert val == pytest.approx(abs(c) * 9.0 ** (1 / p), rel=1e-12)


def test_lp_norm_sup_and_zero(grid2, rng):
    u = random_field(grid2, rng)
    assert sp.lp_norm(u, math.inf) == pytest.approx(np.abs(u.values).max())
    assert sp.lp_norm(sp.zeros(grid2), 3.0) == 0.0
    with pytest.raises(ValueError):
        sp.lp_norm(u, 0.5)


@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    g = sp.make_grid(2, 16, 6.0)
    u = random_field(g, np.random.default_rng(seed))
    assert sp.l2_norm(sp.forward_transform(u)) == pytest.approx(sp.l2_norm(u), rel=1e-12)
    direct = math.sqrt(g.cell_volume * np.sum(np.abs(u.values) ** 2))
    assert sp.l2_norm(u) == pytest.approx(direct, rel=1e-12)


def test_inner_product_is_conjugate_linear_in_second_slot(grid2, rng):
    f, g = random_field(grid2, rng), random_field(grid2, rng)
    assert sp.inner(f, f).real == pytest.approx(sp.l2_norm(f) ** 2)
    assert sp.inner(f, g * 2j) == pytest.approx(-2j * sp.inner(f, g))


def test_mass_of_batches_over_leading_axes(grid2, rng):
    batch = np.stack([random_field(grid2, rng).values for _ in range(3)])
    masses = sp.mass_of(batch, grid2)
    for b, m in zip(batch, masses):
        assert m == pytest.approx(sp.l2_norm(sp.SpectralField(grid2, b)) ** 2, rel=1e-13)


def test_boundary_mass_fraction_small_for_centred_gaussian(grid2):
    assert sp.boundary_mass_fraction(sp.gaussian(grid2, 1.0, 1.0)) < 1e-10
    assert sp.boundary_mass_fraction(sp.zeros(grid2)) == 0.0


# -- snapshots --------------------------------------------------------------

def test_snapshot_roundtrip(tmp_path, grid2, rng):
    u = random_field(grid2, rng)
    path = tmp_path / "u.bin"
    sp.write_snapshot(path, u)
    data = path.read_bytes()
    assert data[:4] == b"FNLS"
    assert len(data) == 32 + 16 * grid2.size
    back = sp.read_snapshot(path)
    assert back.grid == grid2
    np.testing.assert_array_equal(back.values, u.values)


def test_snapshot_rejects_corrupt_files(tmp_path, grid2):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        sp.read_snapshot(path)
    path.write_bytes(b"FN")
    with pytest.raises(ValueError):
        sp.read_snapshot(path)

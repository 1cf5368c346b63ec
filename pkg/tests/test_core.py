import numpy as np
import pytest

from fqm.core import (
    MOMENTUM,
    Free,
    PhysicalParams,
    PotentialField,
    PowerLaw,
    SpatialGrid,
    Tabulated,
    WaveFunction,
    gaussian,
    inner_product,
    lattice_plane_wave,
    make_grid,
    normalize,
    parity_index,
    random_state,
    sample_potential,
)


@pytest.mark.parametrize("alpha", [1.0, 0.5, 2.5, float("nan")])
def test_alpha_outside_range_rejected(alpha):
    with pytest.raises(ValueError):
        PhysicalParams(alpha)


def test_alpha_two_accepted():
    assert PhysicalParams(2.0).d_alpha == 0.5


@pytest.mark.parametrize("kwargs", [{"d_alpha": 0.0}, {"hbar": -1.0}, {"d_alpha": float("inf")}])
def test_nonpositive_constants_rejected(kwargs):
    with pytest.raises(ValueError):
        PhysicalParams(1.5, **kwargs)


@pytest.mark.parametrize("points", [6, 12, 4, 100])
def test_grid_needs_power_of_two(points):
    with pytest.raises(ValueError):
        SpatialGrid(1, points, 1.0)


def test_grid_dim_and_extent_checked():
    with pytest.raises(ValueError):
        SpatialGrid(4, 8, 1.0)
    with pytest.raises(ValueError):
        SpatialGrid(1, 8, 0.0)


def test_axis_is_centred_and_contains_origin():
    g = make_grid(1, 16, 8.0)
    x = g.axis()
    assert x[0] == -4.0
    assert x[8] == 0.0
    assert np.isclose(x[-1], 4.0 - 0.5)


def test_parity_index_maps_x_to_minus_x():
    g = make_grid(2, 16, 8.0)
    xs, ys = g.coordinates()
    idx = parity_index(g)
    # The node at -L/2 maps to itself: its mirror image is the periodic copy.
    inner = np.abs(xs) < 4.0
    inner &= np.abs(ys) < 4.0
    assert np.array_equal(xs[idx][inner], -xs[inner])
    assert np.array_equal(ys[idx][inner], -ys[inner])


def test_momentum_lattice():
    g = make_grid(1, 8, 2 * np.pi)
    mom = g.momentum(hbar=2.0)
    assert list(mom.wavenumbers()) == [0, 1, 2, 3, -4, -3, -2, -1]
    assert np.allclose(mom.axis(), 2.0 * mom.wavenumbers())
    assert mom.nyquist_mask()[0].sum() == 1


def test_gaussian_is_normalized():
    g = make_grid(1, 256, 30.0)
    psi = gaussian(g, center=1.0, width=1.3, momentum=2.0)
    assert abs(psi.norm() - 1.0) < 1e-13


def test_parseval_between_representations():
    g = make_grid(2, 32, 10.0)
    psi = random_state(g, np.random.default_rng(3))
    phi = psi.to_momentum()
    assert phi.representation == MOMENTUM
    assert abs(phi.norm_squared() - psi.norm_squared()) < 1e-12
    back = phi.to_position()
    assert np.allclose(back.amplitudes, psi.amplitudes, atol=1e-14)


def test_inner_product_is_conjugate_linear_in_first_slot():
    g = make_grid(1, 32, 5.0)
    rng = np.random.default_rng(0)
    a, b = random_state(g, rng), random_state(g, rng)
    assert np.isclose(inner_product(1j * a, b), -1j * inner_product(a, b))
    assert np.isclose(inner_product(a, b), np.conj(inner_product(b, a)))


def test_wavefunction_rejects_bad_amplitudes():
    g = make_grid(1, 8, 1.0)
    with pytest.raises(ValueError):
        WaveFunction(g, np.zeros(7))
    with pytest.raises(ValueError):
        WaveFunction(g, np.full(8, np.nan))
    with pytest.raises(ValueError):
        normalize(WaveFunction(g, np.zeros(8)))


def test_wavefunction_is_immutable():
    g = make_grid(1, 8, 1.0)
    psi = WaveFunction(g, np.ones(8))
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 2.0


def test_plane_wave_matches_direct_formula():
    g = make_grid(1, 64, 7.0)
    wave = lattice_plane_wave(g, 5)
    direct = np.exp(1j * 2 * np.pi * 5 * g.axis() / g.extent)
    assert np.allclose(wave.amplitudes, direct, atol=1e-13)


def test_sample_potential_kinds():
    g = make_grid(1, 16, 4.0)
    assert not np.any(sample_potential(Free(), g).values)
    v = sample_potential(PowerLaw(2.0, 1.5), g)
    assert np.allclose(v.values, 2.0 * np.abs(g.axis()) ** 1.5)
    t = sample_potential(Tabulated(tuple(range(16))), g)
    assert t.values[3] == 3.0
    with pytest.raises(ValueError):
        sample_potential(Tabulated((1.0, 2.0)), g)


def test_power_law_potential_is_even():
    g = make_grid(2, 16, 4.0)
    assert sample_potential(PowerLaw(1.0, 1.7), g).is_even()
    assert not PotentialField(g, g.coordinates()[0]).is_even()


def test_power_law_exponent_checked():
    with pytest.raises(ValueError):
        PowerLaw(1.0, 2.5)
    with pytest.raises(ValueError):
        PowerLaw(-1.0, 2.0)

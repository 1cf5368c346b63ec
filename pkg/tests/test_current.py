import numpy as np
import pytest

from fqm.core import Free, PhysicalParams, WaveFunction, gaussian, make_grid, random_state, sample_potential, PowerLaw
from fqm.current import (
    continuity_residual,
    current_density,
    current_via_velocity,
    plane_wave,
    plane_wave_energy,
    probability_density,
    spectral_divergence,
    spectral_gradient,
    velocity_eigenvalue,
)
from fqm.dynamics import EvolutionPlan, split_step


def stencil_current(psi, h):
    """Textbook current Im(psi* dpsi/dx) (m = hbar = 1), fourth-order stencil."""
    d = (-np.roll(psi, -2) + 8 * np.roll(psi, -1) - 8 * np.roll(psi, 1) + np.roll(psi, 2)) / (12 * h)
    return (np.conj(psi) * d).imag


def test_density_of_gaussian_integrates_to_one():
    g = make_grid(2, 64, 14.0)
    rho = probability_density(gaussian(g, center=[0.5, -1.0]))
    assert np.all(rho.values >= 0)
    assert abs(rho.total() - 1.0) < 1e-12


def test_density_of_zero_field():
    g = make_grid(1, 16, 2.0)
    assert not np.any(probability_density(WaveFunction(g, np.zeros(16))).values)


def test_alpha_two_current_matches_stencil():
    g = make_grid(1, 2048, 30.0)
    psi = gaussian(g, center=-1.0, width=1.2, momentum=1.5)
    j = current_density(psi, PhysicalParams(2.0, 0.5)).components[0]
    ref = stencil_current(psi.amplitudes, g.spacing)
    assert np.max(np.abs(j - ref)) < 1e-6


@pytest.mark.parametrize("alpha", [1.2, 1.5, 2.0])
def test_real_state_carries_no_current(alpha):
    g = make_grid(1, 128, 12.0)
    x = g.axis()
    psi = WaveFunction(g, np.exp(-(x**2)) * (1 + 0.3 * x))
    params = PhysicalParams(alpha)
    assert np.max(np.abs(current_density(psi, params).components)) < 1e-12
    assert np.max(np.abs(current_via_velocity(psi, params).components)) < 1e-12


@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0])
def test_two_constructions_agree(alpha):
    g = make_grid(2, 32, 8.0)
    rng = np.random.default_rng(7)
    params = PhysicalParams(alpha, 0.9, 1.3)
    for _ in range(5):
        psi = random_state(g, rng)
        a = current_density(psi, params).components
        b = current_via_velocity(psi, params).components
        assert np.max(np.abs(a - b)) < 1e-12


def test_velocity_eigenvalue():
    assert velocity_eigenvalue(4.0, PhysicalParams(1.5, 1.0))[0] == pytest.approx(3.0, rel=1e-15)
    assert velocity_eigenvalue(2.5, PhysicalParams(2.0, 0.5))[0] == pytest.approx(2.5, rel=1e-15)
    assert not np.any(velocity_eigenvalue([0.0, 0.0], PhysicalParams(1.5)))
    v = velocity_eigenvalue([3.0, 4.0], PhysicalParams(1.5, 1.0))
    assert np.allclose(v, 1.5 * 5**-0.5 * np.array([3.0, 4.0]))


def test_unit_flux_plane_wave_alpha_two():
    g = make_grid(1, 64, 2 * np.pi)
    psi = plane_wave(1, PhysicalParams(2.0, 0.5), g)
    assert np.allclose(np.abs(psi.amplitudes), 1.0)


@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0])
@pytest.mark.parametrize("k", [1, -3, 17])
def test_plane_wave_current_is_unit(alpha, k):
    g = make_grid(1, 64, 10.0)
    params = PhysicalParams(alpha, 0.7, 1.2)
    j = current_density(plane_wave(k, params, g), params).components[0]
    assert np.max(np.abs(j - np.sign(k))) < 1e-12


def test_plane_wave_current_direction_in_two_dimensions():
    g = make_grid(2, 16, 6.0)
    params = PhysicalParams(1.5)
    j = current_density(plane_wave([3, 4], params, g), params)
    assert np.max(np.abs(j.magnitude() - 1.0)) < 1e-12
    assert np.allclose(j.components[0], 0.6)
    assert np.allclose(j.components[1], 0.8)


def test_plane_wave_rejections():
    g = make_grid(1, 16, 4.0)
    params = PhysicalParams(1.5)
    with pytest.raises(ValueError):
        plane_wave(0, params, g)
    with pytest.raises(ValueError):
        plane_wave(-8, params, g)
    with pytest.raises(ValueError):
        plane_wave(9, params, g)


def test_plane_wave_energy_label():
    g = make_grid(1, 16, 2 * np.pi)
    assert plane_wave_energy(2, PhysicalParams(1.5, 1.0), g) == pytest.approx(2**1.5)


def test_spectral_gradient_matches_differences_at_second_order():
    errs = []
    for n in (64, 128, 256):
        g = make_grid(1, n, 2 * np.pi)
        x = g.axis()
        f = np.exp(np.sin(x))
        fd = (np.roll(f, -1) - np.roll(f, 1)) / (2 * g.spacing)
        errs.append(np.max(np.abs(spectral_gradient(g, f)[0].real - fd)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_divergence_of_gradient_is_laplacian():
    g = make_grid(2, 32, 2 * np.pi)
    x, y = g.coordinates()
    f = np.sin(x) * np.cos(2 * y)
    lap = spectral_divergence(g, spectral_gradient(g, f).real)
    assert np.allclose(lap, -5 * f, atol=1e-12)


def _pair(alpha, dt, grid, potential=None):
    params = PhysicalParams(alpha)
    pot = potential if potential is not None else sample_potential(PowerLaw(0.5, 2.0), grid)
    psi = gaussian(grid, center=1.0, momentum=0.5)
    plan = EvolutionPlan(params, grid, pot, dt)
    return psi, split_step(plan, psi, 1), params


def test_global_continuity_residual_vanishes():
    g = make_grid(1, 256, 20.0)
    for alpha in (1.3, 2.0):
        psi, nxt, params = _pair(alpha, 0.01, g)
        glob, _ = continuity_residual(psi, nxt, 0.01, params)
        assert glob < 1e-10


def test_pointwise_continuity_second_order_at_alpha_two():
    g = make_grid(1, 256, 20.0)
    res = []
    for dt in (0.02, 0.01, 0.005):
        psi, nxt, params = _pair(2.0, dt, g)
        res.append(continuity_residual(psi, nxt, dt, params)[1])
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.9)


def test_stationary_plane_wave_has_no_residual():
    g = make_grid(1, 64, 10.0)
    params = PhysicalParams(1.5)
    psi = plane_wave(3, params, g)
    nxt = split_step(EvolutionPlan(params, g, sample_potential(Free(), g), 0.01), psi, 1)
    glob, local = continuity_residual(psi, nxt, 0.01, params)
    assert glob < 1e-10
    assert local < 1e-10


def test_continuity_checks_inputs():
    g = make_grid(1, 16, 4.0)
    psi = gaussian(g)
    with pytest.raises(ValueError):
        continuity_residual(psi, gaussian(make_grid(1, 32, 4.0)), 0.1, PhysicalParams(2.0))
    with pytest.raises(ValueError):
        continuity_residual(psi, psi, 0.0, PhysicalParams(2.0))

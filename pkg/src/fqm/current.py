"""Probability density, fractional probability current and continuity checks.

The current uses the pseudo-differential operator
``G = (-hbar^2 Laplacian)^(alpha/2 - 1) grad``, applied spectrally as the
multiplier ``|p|^(alpha-2) * (i p / hbar)`` per axis. Its ``p = 0`` node is
set to zero, and so is each axis's unpaired Nyquist node: an odd multiplier
there would break the conjugation symmetry ``G(psi*) = (G psi)*`` that makes
the current real.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import POSITION, SpatialGrid, WaveFunction, lattice_plane_wave


@dataclass(frozen=True)
class DensityField:
    grid: SpatialGrid
    values: np.ndarray

    def total(self):
        return float(np.sum(self.values) * self.grid.cell_volume)


@dataclass(frozen=True)
class CurrentField:
    """``components[d]`` holds the d-th Cartesian component on every node."""

    grid: SpatialGrid
    components: np.ndarray

    def magnitude(self):
        return np.sqrt(np.sum(self.components**2, axis=0))


def _require_position(psi):
    if psi.representation != POSITION:
        raise ValueError("expected a position-representation wavefunction")


def _odd_multipliers(grid, hbar):
    """Per-axis momentum components with the Nyquist node zeroed."""
    mom = grid.momentum(hbar)
    comps = []
    for comp, nyq in zip(mom.components(), mom.nyquist_mask()):
        comps.append(np.where(nyq, 0.0, comp))
    return comps, mom.magnitude()


def _radial_power(magnitude, power):
    out = np.zeros_like(magnitude)
    nz = magnitude > 0
    out[nz] = magnitude[nz] ** power
    return out


def current_operator_multipliers(grid, params):
    """Spectral multipliers of ``(-hbar^2 Laplacian)^(alpha/2-1) d/dx_d``."""
    comps, mag = _odd_multipliers(grid, params.hbar)
    radial = _radial_power(mag, params.alpha - 2.0)
    return [radial * (1j * c / params.hbar) for c in comps]


def velocity_multipliers(grid, params):
    """Spectral multipliers of the velocity operator ``alpha D |p|^(alpha-2) p``."""
    comps, mag = _odd_multipliers(grid, params.hbar)
    radial = params.alpha * params.d_alpha * _radial_power(mag, params.alpha - 2.0)
    return [radial * c for c in comps]


def spectral_gradient(grid, values):
    """``d/dx_d`` of a periodic field, one array per axis (Nyquist zeroed)."""
    comps, _ = _odd_multipliers(grid, 1.0)
    spec = np.fft.fftn(values)
    return np.array([np.fft.ifftn(1j * c * spec) for c in comps])


def spectral_divergence(grid, components):
    comps, _ = _odd_multipliers(grid, 1.0)
    total = sum(1j * c * np.fft.fftn(f) for c, f in zip(comps, components))
    return np.fft.ifftn(total).real


def probability_density(psi):
    _require_position(psi)
    amps = psi.amplitudes
    return DensityField(psi.grid, (amps.real**2 + amps.imag**2))


def current_density(psi, params):
    """``j = (D hbar / i) [psi* G psi - psi G psi*]``, evaluated literally."""
    _require_position(psi)
    amps = psi.amplitudes
    spec = np.fft.fftn(amps)
    spec_conj = np.fft.fftn(np.conj(amps))
    out = []
    for mult in current_operator_multipliers(psi.grid, params):
        g_psi = np.fft.ifftn(mult * spec)
        g_conj = np.fft.ifftn(mult * spec_conj)
        out.append(params.d_alpha * params.hbar / 1j * (np.conj(amps) * g_psi - amps * g_conj))
    field = np.array(out)
    scale = max(np.max(np.abs(field)), np.finfo(float).tiny)
    residue = np.max(np.abs(field.imag))
    if residue >= 1e-10 * scale:
        raise ArithmeticError(f"current has imaginary residue {residue:.3e} (scale {scale:.3e})")
    return CurrentField(psi.grid, field.real.copy())


def current_via_velocity(psi, params):
    """``j = (1/alpha) [psi (v psi)* + psi* (v psi)]`` with the spectral velocity."""
    _require_position(psi)
    amps = psi.amplitudes
    spec = np.fft.fftn(amps)
    out = []
    for mult in velocity_multipliers(psi.grid, params):
        v_psi = np.fft.ifftn(mult * spec)
        out.append((2.0 / params.alpha) * (np.conj(amps) * v_psi).real)
    return CurrentField(psi.grid, np.array(out))


def velocity_eigenvalue(p, params):
    """``alpha D |p|^(alpha-2) p``; the zero vector at ``p = 0``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    mag = float(np.linalg.norm(p))
    if mag == 0.0:
        return np.zeros_like(p)
    return params.alpha * params.d_alpha * mag ** (params.alpha - 2.0) * p


def plane_wave(k, params, grid):
    """Unit-flux plane wave for integer lattice index ``k``.

    Amplitude ``sqrt(alpha / (2 v))`` with ``v = alpha D |p|^(alpha-1)``. The
    zero mode and Nyquist components carry no current on the grid and are
    rejected.
    """
    k = np.broadcast_to(np.asarray(k, dtype=np.int64), (grid.dim,))
    if not np.any(k):
        raise ValueError("plane wave at p = 0 has zero velocity and no unit-flux normalization")
    ks = grid.momentum(params.hbar).wavenumbers()
    for kk in k:
        if kk not in ks:
            raise ValueError(f"lattice index {kk} is outside the momentum grid")
        if kk == -(grid.points // 2):
            raise ValueError("Nyquist-node plane waves carry no current on the grid")
    p = 2.0 * np.pi * params.hbar * k / grid.extent
    speed = params.alpha * params.d_alpha * float(np.linalg.norm(p)) ** (params.alpha - 1.0)
    base = lattice_plane_wave(grid, k, params.hbar)
    return base * np.sqrt(params.alpha / (2.0 * speed))


def plane_wave_energy(k, params, grid):
    k = np.broadcast_to(np.asarray(k, dtype=np.int64), (grid.dim,))
    p = 2.0 * np.pi * params.hbar * k / grid.extent
    return params.d_alpha * float(np.linalg.norm(p)) ** params.alpha


def continuity_residual(psi_t, psi_next, dt, params):
    """Return ``(global, pointwise)`` continuity residuals between snapshots.

    ``global`` is ``|(Int rho(t+dt) - Int rho(t)) / dt|``. ``pointwise`` is the
    L2 norm of ``(rho(t+dt) - rho(t)) / dt + div j`` with the current averaged
    over the two snapshots, a midpoint rule accurate to O(dt^2).
    """
    if psi_t.grid != psi_next.grid:
        raise ValueError("snapshots live on different grids")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = psi_t.grid
    rho0 = probability_density(psi_t)
    rho1 = probability_density(psi_next)
    global_res = abs(rho1.total() - rho0.total()) / dt
    j_mid = 0.5 * (current_density(psi_t, params).components + current_density(psi_next, params).components)
    local = (rho1.values - rho0.values) / dt + spectral_divergence(grid, j_mid)
    pointwise = float(np.sqrt(np.sum(local**2) * grid.cell_volume))
    return global_res, pointwise

"""Grids, wavefunctions, potentials and the physical-parameter record.

Position space is a periodic box centred on the origin: node ``i`` along an
axis sits at ``(i - N/2) * h``, so the parity map ``i -> (N - i) mod N`` is an
exact grid symmetry. Momenta follow the discrete Fourier lattice
``p_k = 2*pi*hbar*k / L`` with ``k`` in numpy's ``fftfreq`` ordering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

POSITION = "position"
MOMENTUM = "momentum"


@dataclass(frozen=True)
class PhysicalParams:
    """Levy index, generalized diffusion coefficient and Planck constant.

    Defaults are natural units matching ``alpha=2, m=1``: ``d_alpha = 1/2``
    and ``hbar = 1``.
    """

    alpha: float
    d_alpha: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "d_alpha", "hbar"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must satisfy 1 < alpha <= 2, got {self.alpha}")
        if self.d_alpha <= 0:
            raise ValueError(f"d_alpha must be positive, got {self.d_alpha}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    dim: int
    points: int
    extent: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if isinstance(self.points, bool) or int(self.points) != self.points:
            raise ValueError("points per axis must be an integer")
        if not _is_power_of_two(int(self.points)) or self.points < 8:
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.points}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def spacing(self):
        return self.extent / self.points

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def size(self):
        return self.points**self.dim

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @property
    def volume(self):
        return self.extent**self.dim

    def axis(self):
        """Coordinates along one axis, spanning [-L/2, L/2)."""
        return (np.arange(self.points) - self.points // 2) * self.spacing

    def coordinates(self):
        """Tuple of ``dim`` coordinate arrays, each of full grid shape."""
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dim), indexing="ij")

    def radius(self):
        return np.sqrt(sum(c * c for c in self.coordinates()))

    def momentum(self, hbar=1.0):
        return MomentumGrid(self, hbar)


@dataclass(frozen=True)
class MomentumGrid:
    grid: SpatialGrid
    hbar: float = 1.0

    def wavenumbers(self):
        """Signed integer DFT indices along one axis (fftfreq order)."""
        n = self.grid.points
        return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)

    def axis(self):
        return 2.0 * np.pi * self.hbar * self.wavenumbers() / self.grid.extent

    def components(self):
        ax = self.axis()
        return np.meshgrid(*([ax] * self.grid.dim), indexing="ij")

    def magnitude(self):
        return np.sqrt(sum(c * c for c in self.components()))

    def nyquist_mask(self):
        """Per-axis boolean masks flagging the unpaired Nyquist node."""
        k = self.wavenumbers()
        nyq = k == -(self.grid.points // 2)
        masks = []
        for d in range(self.grid.dim):
            shape = [1] * self.grid.dim
            shape[d] = self.grid.points
            masks.append(np.broadcast_to(nyq.reshape(shape), self.grid.shape))
        return masks


@dataclass(frozen=True)
class WaveFunction:
    grid: SpatialGrid
    amplitudes: np.ndarray
    representation: str = POSITION

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {amps.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("wavefunction amplitudes must be finite")
        if self.representation not in (POSITION, MOMENTUM):
            raise ValueError(f"unknown representation {self.representation!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def measure(self):
        # Parseval-consistent weight: forward DFT carries no prefactor.
        if self.representation == POSITION:
            return self.grid.cell_volume
        return self.grid.cell_volume / self.grid.size

    def norm_squared(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.measure())

    def norm(self):
        return float(np.sqrt(self.norm_squared()))

    def to_momentum(self):
        if self.representation == MOMENTUM:
            return self
        return WaveFunction(self.grid, np.fft.fftn(self.amplitudes), MOMENTUM)

    def to_position(self):
        if self.representation == POSITION:
            return self
        return WaveFunction(self.grid, np.fft.ifftn(self.amplitudes), POSITION)

    def with_amplitudes(self, amplitudes):
        return WaveFunction(self.grid, amplitudes, self.representation)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_amplitudes(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar):
        return self.with_amplitudes(self.amplitudes * scalar)

    __rmul__ = __mul__


def _check_compatible(a, b):
    if a.grid != b.grid:
        raise ValueError("wavefunctions live on different grids")
    if a.representation != b.representation:
        raise ValueError("wavefunctions are in different representations")


@dataclass(frozen=True)
class Free:
    label: str = "free"


@dataclass(frozen=True)
class PowerLaw:
    """``V(r) = q2 * |r|**beta`` with ``q2 > 0`` and ``1 < beta <= 2``."""

    q2: float
    beta: float
    label: str = "power-law"

    def __post_init__(self):
        if not (np.isfinite(self.q2) and self.q2 > 0):
            raise ValueError(f"q2 must be positive, got {self.q2}")
        if not 1.0 < self.beta <= 2.0:
            raise ValueError(f"beta must satisfy 1 < beta <= 2, got {self.beta}")


@dataclass(frozen=True)
class Tabulated:
    samples: tuple = field(default=())
    label: str = "tabulated"

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tabulated potential samples must be finite")


PotentialSpec = Union[Free, PowerLaw, Tabulated]


@dataclass(frozen=True)
class PotentialField:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values)
        if np.iscomplexobj(vals):
            raise ValueError("potential values must be real")
        vals = vals.astype(float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"potential shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def is_even(self):
        return bool(np.array_equal(self.values, self.values[parity_index(self.grid)]))


def make_grid(dim, points_per_axis, extent_per_axis):
    return SpatialGrid(int(dim), points_per_axis, float(extent_per_axis))


def normalize(psi):
    n2 = psi.norm_squared()
    if not n2 > 0:
        raise ValueError("cannot normalize a zero-norm wavefunction")
    return psi.with_amplitudes(psi.amplitudes / np.sqrt(n2))


def inner_product(phi, chi):
    """Discrete ``(phi, chi)``: conjugate-linear in ``phi``, linear in ``chi``."""
    _check_compatible(phi, chi)
    return complex(np.vdot(phi.amplitudes, chi.amplitudes) * phi.measure())


def sample_potential(spec, grid):
    if isinstance(spec, Free):
        values = np.zeros(grid.shape)
    elif isinstance(spec, PowerLaw):
        values = spec.q2 * grid.radius() ** spec.beta
    elif isinstance(spec, Tabulated):
        arr = np.asarray(spec.samples, dtype=float)
        if arr.size != grid.size:
            raise ValueError(f"tabulated potential has {arr.size} samples, grid has {grid.size} nodes")
        values = arr.reshape(grid.shape)
    else:
        raise TypeError(f"unsupported potential spec {type(spec).__name__}")
    return PotentialField(grid, values)


def parity_index(grid):
    """Index tuple implementing ``f(r) -> f(-r)`` on the centred grid."""
    idx = (-np.arange(grid.points) + 2 * (grid.points // 2)) % grid.points
    return np.ix_(*([idx] * grid.dim))


def gaussian(grid, center=0.0, width=1.0, momentum=0.0, hbar=1.0):
    """Normalized Gaussian packet ``exp(-|r-c|^2/(2 w^2) + i p.r/hbar)``."""
    coords = grid.coordinates()
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    momentum = np.broadcast_to(np.asarray(momentum, dtype=float), (grid.dim,))
    r2 = sum((c - c0) ** 2 for c, c0 in zip(coords, center))
    phase = sum(p0 * c for c, p0 in zip(coords, momentum))
    amps = np.exp(-r2 / (2.0 * width**2) + 1j * phase / hbar)
    return normalize(WaveFunction(grid, amps))


def lattice_plane_wave(grid, k, hbar=1.0):
    """Unnormalized plane wave ``exp(i p.r/hbar)`` for integer lattice index ``k``."""
    k = np.broadcast_to(np.asarray(k, dtype=np.int64), (grid.dim,))
    n = grid.points
    # Reduce k * (i - N/2) modulo N in integers so the phase carries no
    # roundoff from large arguments.
    offsets = np.arange(n, dtype=np.int64) - n // 2
    axes = [np.exp(2j * np.pi * ((int(kk) * offsets) % n) / n) for kk in k]
    amps = axes[0]
    for ax in axes[1:]:
        amps = np.multiply.outer(amps, ax)
    return WaveFunction(grid, amps)


def random_state(grid, rng):
    """Normalized state with independent complex Gaussian amplitudes."""
    amps = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return normalize(WaveFunction(grid, amps))

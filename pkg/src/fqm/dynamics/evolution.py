"""Strang split-step propagation in real and imaginary time."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import POSITION, PhysicalParams, PotentialField, SpatialGrid, WaveFunction, normalize
from ..riesz import HermiticityError, RieszOperator, apply_hamiltonian

REAL_TIME = "real-time"
IMAGINARY_TIME = "imaginary-time"


@dataclass(frozen=True)
class EvolutionPlan:
    """Everything a stepper needs; the diagonal factors are built once."""

    params: PhysicalParams
    grid: SpatialGrid
    potential: PotentialField
    dt: float
    scheme: str = REAL_TIME
    kinetic: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in (REAL_TIME, IMAGINARY_TIME):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.potential.grid != self.grid:
            raise ValueError("potential grid does not match plan grid")
        kin = self.params.d_alpha * RieszOperator(self.params, self.grid).multiplier
        object.__setattr__(self, "kinetic", kin)

    def operator(self):
        return RieszOperator(self.params, self.grid)

    def factors(self, dt=None):
        """``(potential half-step, kinetic full step)`` multipliers."""
        dt = self.dt if dt is None else dt
        hbar = self.params.hbar
        if self.scheme == REAL_TIME:
            return (
                np.exp(-0.5j * dt / hbar * self.potential.values),
                np.exp(-1j * dt / hbar * self.kinetic),
            )
        return np.exp(-0.5 * dt / hbar * self.potential.values), np.exp(-dt / hbar * self.kinetic)


@dataclass(frozen=True)
class GroundStateResult:
    energy: float
    state: WaveFunction
    iterations: int
    residual: float
    converged: bool
    final_dt: float


def _check_state(plan, psi):
    if psi.grid != plan.grid:
        raise ValueError("wavefunction grid does not match plan grid")
    if psi.representation != POSITION:
        raise ValueError("expected a position-representation wavefunction")


def _strang(amps, half_v, kin):
    amps = half_v * amps
    amps = np.fft.ifftn(kin * np.fft.fftn(amps))
    return half_v * amps


def split_step(plan, psi, n_steps):
    """Apply ``n_steps`` real-time Strang steps.

    The two potential half-steps are kept separate rather than merged across
    steps, so ``split_step(n)`` followed by ``split_step(m)`` is bitwise equal
    to ``split_step(n + m)``.
    """
    if plan.scheme != REAL_TIME:
        raise ValueError("split_step needs a real-time plan")
    if int(n_steps) != n_steps or n_steps < 0:
        raise ValueError("n_steps must be a non-negative integer")
    _check_state(plan, psi)
    half_v, kin = plan.factors()
    amps = np.array(psi.amplitudes)
    for step in range(int(n_steps)):
        amps = _strang(amps, half_v, kin)
        if not np.all(np.isfinite(amps)):
            raise FloatingPointError(f"non-finite amplitude after step {step + 1} (dt={plan.dt})")
    return psi.with_amplitudes(amps)


def stationary_residual(op, potential, phi, energy):
    """L2 norm of ``H phi - E phi``."""
    h_phi = apply_hamiltonian(op, potential, phi)
    return (h_phi - energy * phi).norm()


def _energy_and_residual(op, potential, psi):
    h_psi = apply_hamiltonian(op, potential, psi)
    value = complex(np.vdot(psi.amplitudes, h_psi.amplitudes) * psi.measure())
    if abs(value.imag) >= 1e-10 * max(1.0, abs(value.real)):
        raise HermiticityError(f"energy has imaginary part {value.imag!r}")
    energy = value.real
    return energy, (h_psi - energy * psi).norm()


def imaginary_time_ground_state(plan, psi0, tol, max_iters, stall_steps=5):
    """Relax ``psi0`` under ``exp(-H t / hbar)`` until energy and residual settle.

    The split propagator's fixed point differs from the grid eigenvector by
    O(dt^2), which puts a floor under the residual. Whenever the residual has
    stopped falling for ``stall_steps`` consecutive steps while still above
    ``tol``, the step is halved (never below ``plan.dt / 2**20``). Success
    needs ``|E_k - E_{k-1}| < tol`` and residual ``<= tol``. On running out of
    iterations the lowest-residual iterate is returned with
    ``converged=False``.
    """
    if plan.scheme != IMAGINARY_TIME:
        raise ValueError("imaginary_time_ground_state needs an imaginary-time plan")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if int(max_iters) != max_iters or max_iters < 1:
        raise ValueError("max_iters must be a positive integer")
    _check_state(plan, psi0)
    op = plan.operator()
    potential = plan.potential
    dt = plan.dt
    min_dt = plan.dt / 2**20
    half_v, kin = plan.factors(dt)

    psi = normalize(psi0)
    e_prev, r_prev = _energy_and_residual(op, potential, psi)
    best = GroundStateResult(e_prev, psi, 0, r_prev, False, dt)
    stalled = 0
    for it in range(1, int(max_iters) + 1):
        amps = _strang(psi.amplitudes, half_v, kin)
        if not np.all(np.isfinite(amps)):
            raise FloatingPointError(f"non-finite amplitude at iteration {it} (dt={dt})")
        psi = normalize(psi.with_amplitudes(amps))
        energy, residual = _energy_and_residual(op, potential, psi)
        if residual < best.residual:
            best = GroundStateResult(energy, psi, it, residual, False, dt)
        if abs(energy - e_prev) < tol and residual <= tol:
            return GroundStateResult(energy, psi, it, residual, True, dt)
        stalled = stalled + 1 if (r_prev - residual) < 1e-2 * dt * residual else 0
        if stalled >= stall_steps and residual > tol and dt / 2 >= min_dt:
            dt /= 2
            half_v, kin = plan.factors(dt)
            stalled = 0
        e_prev, r_prev = energy, residual
    return GroundStateResult(best.energy, best.state, int(max_iters), best.residual, False, best.final_dt)

"""Fractional Bohr atom and semiclassical fractional-oscillator spectra.

Bohr levels follow from the quantized momentum ``p_n a_n = n hbar`` together
with the force balance ``alpha D (n hbar / a)^alpha = Ze^2 / a``. Oscillator
levels for ``H = D|p|^alpha + q2|x|^beta`` come from the Bohr-Sommerfeld rule
``oint p dx = 2 pi hbar (n + 1/2)``, both in closed form and by direct
quadrature plus root finding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .core import PhysicalParams

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class BohrParams:
    params: PhysicalParams
    coupling: float  # Ze^2

    def __post_init__(self):
        if not (np.isfinite(self.coupling) and self.coupling > 0):
            raise ValueError(f"coupling Ze^2 must be positive, got {self.coupling}")


@dataclass(frozen=True)
class OscillatorParams:
    params: PhysicalParams
    q2: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.q2) and self.q2 > 0):
            raise ValueError(f"q2 must be positive, got {self.q2}")
        if not 1.0 < self.beta <= 2.0:
            raise ValueError(f"beta must satisfy 1 < beta <= 2, got {self.beta}")

    @property
    def exponent(self):
        a, b = self.params.alpha, self.beta
        return a * b / (a + b)


@dataclass(frozen=True)
class SpectrumResult:
    levels: tuple
    parameters: object
    method: str = CLOSED_FORM

    def energies(self):
        return np.array([e for _, e in self.levels])


def _positive_int(n, name="n", minimum=1):
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def bohr_ground_radius(bp):
    p = bp.params
    return (p.alpha * p.d_alpha * p.hbar**p.alpha / bp.coupling) ** (1.0 / (p.alpha - 1.0))


def bohr_energy_scale(bp):
    """``E_0 = ((Ze^2)^alpha / (alpha^alpha D hbar^alpha))^(1/(alpha-1))``."""
    p = bp.params
    base = bp.coupling**p.alpha / (p.alpha**p.alpha * p.d_alpha * p.hbar**p.alpha)
    return base ** (1.0 / (p.alpha - 1.0))


def bohr_radius(bp, n):
    n = _positive_int(n)
    a = bp.params.alpha
    return bohr_ground_radius(bp) * n ** (a / (a - 1.0))


def bohr_energy(bp, n):
    n = _positive_int(n)
    a = bp.params.alpha
    return -(a - 1.0) * bohr_energy_scale(bp) * n ** (-a / (a - 1.0))


def bohr_momentum(bp, n):
    return n * bp.params.hbar / bohr_radius(bp, n)


def bohr_kinetic_energy(bp, n):
    """``D (n hbar / a_n)^alpha`` on the n-th orbit."""
    return bp.params.d_alpha * bohr_momentum(bp, n) ** bp.params.alpha


def bohr_potential_energy(bp, n):
    return -bp.coupling / bohr_radius(bp, n)


def transition_frequency(bp, k, n):
    """Angular frequency of the ``k -> n`` transition, ``(E_k - E_n) / hbar``."""
    k = _positive_int(k, "k")
    n = _positive_int(n)
    if k <= n:
        raise ValueError(f"transition needs k > n, got k={k}, n={n}")
    return (bohr_energy(bp, k) - bohr_energy(bp, n)) / bp.params.hbar


def transition_frequency_closed_form(bp, k, n):
    """Same frequency written as ``((alpha-1) E_0 / hbar)(n^-s - k^-s)``."""
    k = _positive_int(k, "k")
    n = _positive_int(n)
    if k <= n:
        raise ValueError(f"transition needs k > n, got k={k}, n={n}")
    a = bp.params.alpha
    s = a / (a - 1.0)
    return (a - 1.0) * bohr_energy_scale(bp) / bp.params.hbar * (n ** (-s) - k ** (-s))


def bohr_spectrum(bp, ns):
    return SpectrumResult(tuple((int(n), bohr_energy(bp, n)) for n in ns), bp, CLOSED_FORM)


def beta_function(a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta function needs positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def oscillator_prefactor(op):
    """Energy of the ``(n + 1/2) = 1`` level; ``E_n = prefactor * (n + 1/2)^gamma``."""
    p = op.params
    inner = (
        math.pi * p.hbar * op.beta * p.d_alpha ** (1.0 / p.alpha) * op.q2 ** (1.0 / op.beta)
        / (2.0 * beta_function(1.0 / op.beta, 1.0 / p.alpha + 1.0))
    )
    return inner**op.exponent


def oscillator_level(op, n):
    n = _positive_int(n, minimum=0)
    return oscillator_prefactor(op) * (n + 0.5) ** op.exponent


def action_integral(op, energy, quad_tol=1e-10):
    """``(4 / D^(1/alpha)) Int_0^x_m (E - q2 x^beta)^(1/alpha) dx`` by quadrature.

    With ``x = x_m y`` the integrand vanishes like ``(1 - y)^(1/alpha)`` at
    the turning point; that factor is handed to QUADPACK as an algebraic
    endpoint weight so the remaining integrand is smooth.
    """
    p = op.params
    inv_a = 1.0 / p.alpha
    x_m = (energy / op.q2) ** (1.0 / op.beta)

    def smooth(y):
        gap = energy - op.q2 * (x_m * y) ** op.beta
        return (max(gap, 0.0) / (1.0 - y)) ** inv_a if y < 1.0 else (energy * op.beta) ** inv_a

    value, _ = integrate.quad(
        smooth, 0.0, 1.0, weight="alg", wvar=(0.0, inv_a), epsabs=0.0, epsrel=0.1 * quad_tol, limit=200
    )
    return 4.0 / p.d_alpha**inv_a * x_m * value


def oscillator_level_quadrature(op, n, quad_tol=1e-10):
    """Solve the Bohr-Sommerfeld condition for ``E_n`` numerically.

    The action grows monotonically with ``E``, so a geometric scan from
    ``q2`` brackets the root before Brent's method refines it.
    """
    n = _positive_int(n, minimum=0)
    if not 0 < quad_tol <= 1e-4:
        raise ValueError(f"quad_tol must lie in (0, 1e-4], got {quad_tol}")
    target = 2.0 * math.pi * op.params.hbar * (n + 0.5)

    def mismatch(e):
        return action_integral(op, e, quad_tol) - target

    lo = hi = op.q2
    f_lo = f_hi = mismatch(lo)
    for _ in range(400):
        if f_lo <= 0 <= f_hi and lo < hi:
            break
        if f_lo > 0:
            hi, f_hi = lo, f_lo
            lo /= 4.0
            f_lo = mismatch(lo)
        else:
            lo, f_lo = hi, f_hi
            hi *= 4.0
            f_hi = mismatch(hi)
    else:
        raise ArithmeticError(f"could not bracket the level between {lo:.3e} and {hi:.3e}")
    return optimize.brentq(mismatch, lo, hi, xtol=1e-300, rtol=max(0.01 * quad_tol, 4 * np.finfo(float).eps), maxiter=500)


def oscillator_spectrum(op, ns, method=CLOSED_FORM, quad_tol=1e-10):
    if method == CLOSED_FORM:
        levels = tuple((int(n), oscillator_level(op, n)) for n in ns)
    elif method == QUADRATURE:
        levels = tuple((int(n), oscillator_level_quadrature(op, n, quad_tol)) for n in ns)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectrumResult(levels, op, method)


def equidistance_defect(op, n_max):
    """Largest second difference of the ladder relative to its first gap."""
    n_max = _positive_int(n_max, "n_max", minimum=3)
    levels = np.array([oscillator_level(op, n) for n in range(n_max + 1)])
    second = np.abs(np.diff(levels, 2))
    return float(second.max() / (levels[1] - levels[0]))

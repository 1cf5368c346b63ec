"""Free-particle Levy kernel, its time-sliced composition and kernel propagation.

The kernel is the momentum integral

    K(dr, T) = (2 pi hbar)^-d  Int dp  exp{ i p.dr/hbar - i D T |p|^alpha / hbar }

whose integrand has unit modulus on the real axis, so there is no real-axis
cutoff to truncate at. Both half-line pieces are instead pushed into the
complex plane: ``exp(-i a p)`` goes down a ray where it and the power term
both decay, and ``exp(+i a p)`` is routed through its saddle point
``p* = (a / (alpha c))^(1/(alpha-1))`` and leaves along the steepest-descent
direction. Panels are doubled until two successive sums agree.

Damping maps the time to ``T (1 - i*damping)`` (a Feynman ``i*eps``). It leaves
the semigroup law intact and makes the kernel decay in space. Spatial
composition needs it, because the undamped kernel never decays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import POSITION, PhysicalParams, SpatialGrid, WaveFunction, make_grid

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# Tail truncation: drop the ray once |integrand| < exp(-40) * max |integrand|.
_TAIL_LOG = 40.0
_SAMPLES = 32


class KernelQuadratureError(RuntimeError):
    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class CompositionDomainError(RuntimeError):
    """Composition integrand is not negligible at the edge of the box."""


class KernelResolutionError(ValueError):
    """Kernel oscillates faster than the grid can sample."""


@dataclass(frozen=True)
class KernelRequest:
    params: PhysicalParams
    r_a: object = 0.0
    r_b: object = 0.0
    t_a: float = 0.0
    t_b: float = 1.0
    slices: int = 1
    damping: float = 0.0

    def __post_init__(self):
        if not self.t_b > self.t_a:
            raise ValueError("kernel request needs t_b > t_a")
        if int(self.slices) != self.slices or self.slices < 1:
            raise ValueError("slices must be a positive integer")
        if not (np.isfinite(self.damping) and 0.0 <= self.damping <= 1.0):
            raise ValueError("damping must lie in [0, 1]")
        ra = np.atleast_1d(np.asarray(self.r_a, dtype=float))
        rb = np.atleast_1d(np.asarray(self.r_b, dtype=float))
        if ra.shape != rb.shape or ra.ndim != 1 or ra.size not in (1, 3):
            raise ValueError("r_a and r_b must both be scalars or both 3-vectors")

    @property
    def duration(self):
        return self.t_b - self.t_a

    @property
    def slice_duration(self):
        return self.duration / self.slices

    @property
    def dim(self):
        return np.atleast_1d(np.asarray(self.r_a)).size

    @property
    def distance(self):
        ra = np.atleast_1d(np.asarray(self.r_a, dtype=float))
        rb = np.atleast_1d(np.asarray(self.r_b, dtype=float))
        return float(np.linalg.norm(rb - ra))


def _gl_nodes(npan):
    edges = np.arange(npan)[:, None]
    u = ((edges + _GL_X[None, :]) / npan).ravel()
    w = np.broadcast_to(_GL_W / npan, (npan, _GL_X.size)).ravel().copy()
    return u, w


def _logmag(p, sign, a, c, alpha, m):
    logp = np.log(p)
    return (m * logp + 1j * sign * a * p - 1j * c * np.exp(alpha * logp)).real


def _ray_length(start, direction, sign, a, c, alpha, m, ref, r0):
    """Per-entry ray length past which the integrand is below ``ref - 40``."""
    r = np.array(r0, dtype=float)
    done = np.zeros(r.shape, dtype=bool)
    frac = np.arange(1, _SAMPLES + 1) / _SAMPLES
    for _ in range(200):
        todo = ~done
        if not np.any(todo):
            return r
        pts = start[todo, None] + r[todo, None] * frac[None, :] * direction[todo, None]
        lm = _logmag(pts, sign, a[todo, None], c, alpha, m)
        level = np.maximum(ref[todo], lm.max(axis=1))
        ok = (lm[:, -1] < level - _TAIL_LOG) & (lm[:, -1] < lm[:, -2])
        idx = np.flatnonzero(todo)
        done[idx[ok]] = True
        r[idx[~ok]] *= 2.0
    raise KernelQuadratureError("could not locate the decay of the contour tail", np.inf)


def _geometry(a, c, alpha, m):
    """Contour segments for ``J+ + J-`` at each ``a``; see module docstring."""
    n = a.size
    z0 = np.zeros((n, 4), dtype=np.complex128)
    dz = np.zeros((n, 4), dtype=np.complex128)
    orient = np.array([1.0, 1.0, -1.0, 1.0])
    sign = np.array([-1.0, 1.0, 1.0, 1.0])

    phase_c = -np.angle(c)
    d_minus = np.exp(-1j * (0.5 * np.pi - phase_c) / alpha)
    scale = abs(c) ** (-1.0 / alpha)
    with np.errstate(divide="ignore"):
        r0 = np.minimum(scale, np.where(a > 0, 1.0 / np.maximum(a, 1e-300), np.inf))
    zeros = np.zeros(n, dtype=np.complex128)
    dirs = np.full(n, d_minus)
    # |g(0)| = 1 when m == 0; for m > 0 the sampled maximum sets the level.
    ref0 = np.zeros(n) if m == 0 else np.full(n, -np.inf)
    r_minus = _ray_length(zeros, dirs, -1.0, a, c, alpha, m, ref0, 0.5 * r0)
    z0[:, 0] = 0.0
    dz[:, 0] = r_minus * d_minus

    pstar = (a / (alpha * c)) ** (1.0 / (alpha - 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        fpp = -1j * c * alpha * (alpha - 1.0) * pstar ** (alpha - 2.0)
    theta = 0.5 * (np.pi - np.angle(fpp))
    theta = np.where(np.cos(theta) < 0, theta - np.pi, theta)
    # When the saddle phase a|p*| is small the linear term barely matters and
    # J+ shares the J- ray; a far-off saddle there need not be reachable.
    use_saddle = a * np.abs(pstar) > 1.0

    direct = ~use_saddle
    if np.any(direct):
        # exp(+i a p) grows along this ray by at most exp(a|p*|); the tail
        # search accounts for it through the sampled maximum.
        r_direct = _ray_length(zeros[direct], dirs[direct], 1.0, a[direct], c, alpha, m, ref0[direct], 0.5 * r0[direct])
        dz[direct, 1] = r_direct * d_minus

    pos = use_saddle
    if np.any(pos):
        ap = a[pos]
        pstar = pstar[pos]
        fpp = fpp[pos]
        descent = np.exp(1j * theta[pos])
        pmid = pstar - (np.abs(pstar) / math.sqrt(2.0)) * descent

        frac = np.arange(1, _SAMPLES + 1) / _SAMPLES
        path = np.concatenate(
            [pmid[:, None] * frac[None, :], pstar[:, None] + (pmid - pstar)[:, None] * frac[None, :]],
            axis=1,
        )
        ref = _logmag(path, 1.0, ap[:, None], c, alpha, m).max(axis=1)
        ref = np.maximum(ref, _logmag(pstar, 1.0, ap, c, alpha, m))
        width = 1.0 / np.sqrt(np.abs(fpp))
        r_plus = _ray_length(pstar, descent, 1.0, ap, c, alpha, m, ref, 0.5 * np.minimum(np.abs(pstar), width))

        z0[pos, 1] = 0.0
        dz[pos, 1] = pmid
        z0[pos, 2] = pstar
        dz[pos, 2] = pmid - pstar
        z0[pos, 3] = pstar
        dz[pos, 3] = r_plus * descent
    return z0, dz, orient, sign


def half_line_integrals(a, c, alpha, m=0.0, tol=1e-12, max_panels=4096, backend=None, max_condition_error=1e-6):
    """``J+(a) + J-(a)`` with ``J(a) = Int_0^inf p^m exp(+-i a p - i c p^alpha) dp``.

    Returns ``(values, error_estimates)``. ``backend`` selects a kernel
    implementation explicitly (``"numba"`` or ``"numpy"``); by default the
    one chosen by the environment is used. Entries whose phase is so large
    that rounding alone costs more than ``max_condition_error`` relative
    accuracy raise :class:`KernelQuadratureError`.
    """
    a = np.ascontiguousarray(np.atleast_1d(np.asarray(a, dtype=float)))
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("half-line integrals need finite a >= 0")
    c = complex(c)
    if c.real <= 0 or c.imag > 0:
        raise ValueError("c must have positive real part and non-positive imaginary part")
    sums = _select_backend(backend)
    z0, dz, orient, sign = _geometry(a, c, float(alpha), float(m))

    def evaluate(idx, npan):
        u, w = _gl_nodes(npan)
        return sums(
            np.ascontiguousarray(z0[idx]), np.ascontiguousarray(dz[idx]), orient, sign,
            np.ascontiguousarray(a[idx]), c, float(alpha), float(m), u, w,
        )

    # The saddle phase a*p* is only known to rounding precision, which bounds
    # the attainable relative accuracy from below.
    pstar = np.abs((a / (alpha * c)) ** (1.0 / (alpha - 1.0)))
    floor = 256.0 * np.finfo(float).eps * (1.0 + a * pstar + abs(c) * pstar**alpha)
    if np.any(floor > max_condition_error):
        raise KernelQuadratureError(
            "kernel phase is too large to evaluate in double precision at this separation and time",
            float(floor.max()),
        )
    rtol = np.maximum(tol, floor)

    idx = np.arange(a.size)
    npan = 4
    values = evaluate(idx, npan)
    errors = np.full(a.size, np.inf)
    while idx.size:
        npan *= 2
        if npan > max_panels:
            raise KernelQuadratureError(
                f"kernel quadrature did not converge with {max_panels} panels", float(errors[idx].max())
            )
        new = evaluate(idx, npan)
        err = np.abs(new - values[idx])
        values[idx] = new
        errors[idx] = err
        # Entries far below the batch's largest are settled once their error
        # reaches roundoff on that scale; a purely relative test never would.
        floor_abs = 256.0 * np.finfo(float).eps * np.abs(values).max()
        idx = idx[err > np.maximum(rtol[idx] * np.abs(new), floor_abs)]
    return values, errors


def _select_backend(backend):
    if backend is None:
        return _kernels.contour_sums
    if backend == "numpy":
        return _kernels.contour_sums_numpy
    if backend == "numba":
        if _kernels.contour_sums_numba is None:
            raise RuntimeError("numba backend is disabled")
        return _kernels.contour_sums_numba
    raise ValueError(f"unknown backend {backend!r}")


def kernel_values(params, distance, duration, dim=1, damping=0.0, power=0.0, tol=1e-12, backend=None, return_errors=False):
    """Free kernel at an array of distances.

    ``power > 0`` inserts ``|p|**power`` into the momentum integral, giving
    ``(-hbar^2 Laplacian)^(power/2) K``. ``dim`` is 1 or 3. With
    ``return_errors`` the absolute quadrature error estimates come back too.
    """
    dist = np.abs(np.atleast_1d(np.asarray(distance, dtype=float)))
    if duration <= 0:
        raise ValueError("duration must be positive")
    hbar = params.hbar
    c = params.d_alpha * duration * complex(1.0, -damping) / hbar
    if dim == 1:
        vals, errs = half_line_integrals(dist / hbar, c, params.alpha, power, tol, backend=backend)
        vals, errs = vals / (2.0 * np.pi * hbar), errs / (2.0 * np.pi * hbar)
        return (vals, errs) if return_errors else vals
    if dim == 3:
        out = np.empty(dist.size, dtype=np.complex128)
        errs = np.empty(dist.size)
        small = dist <= 1e-8 * hbar * abs(c) ** (1.0 / params.alpha)
        pref = 4.0 * np.pi / (2.0 * np.pi * hbar) ** 3
        if np.any(small):
            j0, e0 = half_line_integrals(np.zeros(1), c, params.alpha, 2.0 + power, tol, backend=backend)
            out[small] = pref * j0[0] / 2.0
            errs[small] = pref * e0[0] / 2.0
        big = ~small
        if np.any(big):
            r = dist[big]
            # (J+ - J-) from the sum routine: flip the sign of the J- ray term.
            s, es = half_line_integrals(r / hbar, c, params.alpha, 1.0 + power, tol, backend=backend)
            jm, em = _minus_ray(r / hbar, c, params.alpha, 1.0 + power, tol, backend)
            out[big] = pref * hbar / r * (s - 2.0 * jm) / 2j
            errs[big] = pref * hbar / r * (es + 2.0 * em) / 2.0
        return (out, errs) if return_errors else out
    raise NotImplementedError("free kernel is implemented for dim 1 and 3")


def _minus_ray(a, c, alpha, m, tol, backend):
    """``J-(a)`` alone (the single downward ray)."""
    sums = _select_backend(backend)
    z0, dz, orient, sign = _geometry(a, c, alpha, m)
    z0 = np.ascontiguousarray(z0[:, :1])
    dz = np.ascontiguousarray(dz[:, :1])
    npan = 4
    u, w = _gl_nodes(npan)
    old = sums(z0, dz, orient[:1], sign[:1], a, c, alpha, m, u, w)
    while True:
        npan *= 2
        u, w = _gl_nodes(npan)
        new = sums(z0, dz, orient[:1], sign[:1], a, c, alpha, m, u, w)
        err = np.abs(new - old)
        if np.all(err <= np.maximum(tol * np.abs(new), 256.0 * np.finfo(float).eps * np.abs(new).max())):
            return new, err
        if npan > 4096:
            raise KernelQuadratureError("ray quadrature did not converge", float(err.max()))
        old = new


def gaussian_kernel(params, distance, duration, dim=1, damping=0.0):
    """Closed-form ``alpha = 2`` free propagator with ``m = 1 / (2 D)``."""
    if params.alpha != 2.0:
        raise ValueError("the Gaussian kernel is the alpha = 2 special case")
    mass = 1.0 / (2.0 * params.d_alpha)
    t = duration * complex(1.0, -damping)
    dist = np.asarray(distance, dtype=float)
    amp = np.sqrt(mass / (2j * np.pi * params.hbar * t)) ** dim
    return amp * np.exp(1j * mass * dist**2 / (2.0 * params.hbar * t))


def free_kernel(req, tol=1e-12):
    if req.slices != 1:
        raise ValueError("free_kernel evaluates a single slice; use compose_kernel for slices > 1")
    vals = kernel_values(req.params, req.distance, req.duration, req.dim, req.damping, tol=tol)
    return complex(vals[0])


def _lattice_kernel(params, grid, duration, damping, tol):
    """Kernel at every lattice separation, laid out for ``toeplitz_matvec``."""
    m = grid.points
    half = kernel_values(params, np.arange(m) * grid.spacing, duration, 1, damping, tol=tol)
    return np.concatenate([half[:0:-1], half])


def compose_kernel(req, grid=None, tol=1e-12, edge_tol=1e-6):
    """N-slice composition on a 1-D box; guarded by a boundary-mass check.

    Every intermediate coordinate is summed over the nodes of ``grid``
    (default: 1024 nodes over a box of length 40). For each slice the
    marginal integrand ``forward_j(x) * backward_j(x)`` must be below
    ``edge_tol`` of its peak at both box edges.
    """
    value, _ = composition_details(req, grid, tol, edge_tol)
    return value


def composition_details(req, grid=None, tol=1e-12, edge_tol=1e-6):
    """Return ``(value, worst_edge_ratio)`` for :func:`compose_kernel`."""
    if req.slices < 2:
        raise ValueError("compose_kernel needs at least two slices")
    if req.dim != 1:
        raise NotImplementedError("kernel composition is implemented in one dimension")
    grid = grid if grid is not None else make_grid(1, 1024, 40.0)
    if grid.dim != 1:
        raise ValueError("composition grid must be one-dimensional")
    params = req.params
    tau = req.slice_duration
    h = grid.spacing
    x = grid.axis()
    ra = float(np.atleast_1d(req.r_a)[0])
    rb = float(np.atleast_1d(req.r_b)[0])

    lattice = _lattice_kernel(params, grid, tau, req.damping, tol)
    forward = [kernel_values(params, x - ra, tau, 1, req.damping, tol=tol)]
    for _ in range(req.slices - 2):
        forward.append(h * _kernels.toeplitz_matvec(lattice, forward[-1]))
    backward = [kernel_values(params, rb - x, tau, 1, req.damping, tol=tol)]
    for _ in range(req.slices - 2):
        backward.append(h * _kernels.toeplitz_matvec(lattice, backward[-1]))
    backward.reverse()

    worst = 0.0
    for fwd, bwd in zip(forward, backward):
        marginal = np.abs(fwd * bwd)
        peak = marginal.max()
        ratio = max(marginal[0], marginal[-1]) / peak if peak > 0 else 0.0
        worst = max(worst, ratio)
        if not ratio < edge_tol:
            raise CompositionDomainError(
                f"composition integrand at the box edge is {ratio:.2e} of its peak (limit {edge_tol:.0e});"
                " enlarge the box or add damping"
            )
    value = h * np.sum(forward[-1] * backward[-1])
    return complex(value), worst


def max_saddle_momentum(params, duration, distance):
    """Stationary-phase momentum of the kernel at the given separation."""
    return (distance / (params.alpha * params.d_alpha * duration)) ** (1.0 / (params.alpha - 1.0))


def propagate_by_kernel(psi, req, tol=1e-12):
    """``psi_f(x_b) = Int dx_a K(x_b - x_a) psi_i(x_a)`` as a lattice sum.

    The kernel is sampled at every lattice separation up to the box length;
    it must oscillate slower than the grid Nyquist momentum there, otherwise
    the sum aliases and :class:`KernelResolutionError` is raised.
    """
    grid = psi.grid
    if grid.dim != 1:
        raise NotImplementedError("kernel propagation is implemented in one dimension")
    if psi.representation != POSITION:
        raise ValueError("propagate_by_kernel expects a position-representation state")
    params = req.params
    nyquist = np.pi * params.hbar / grid.spacing
    fastest = max_saddle_momentum(params, req.duration, grid.extent)
    if fastest >= nyquist:
        raise KernelResolutionError(
            f"kernel saddle momentum {fastest:.3g} at the box length exceeds the grid Nyquist momentum {nyquist:.3g}"
        )
    amps = np.ascontiguousarray(psi.amplitudes, dtype=np.complex128)
    if not np.any(amps):
        return psi.with_amplitudes(np.zeros_like(amps))
    lattice = _lattice_kernel(params, grid, req.duration, req.damping, tol)
    return psi.with_amplitudes(grid.spacing * _kernels.toeplitz_matvec(lattice, amps))


def kernel_residual_from_values(k_later, k_earlier, riesz_k, dt_probe, params, damping=0.0):
    """``max |i hbar dK/dt - D (1 - i eps) R K|`` from sampled kernel values."""
    dkdt = (np.asarray(k_later) - np.asarray(k_earlier)) / (2.0 * dt_probe)
    res = 1j * params.hbar * dkdt - complex(1.0, -damping) * params.d_alpha * np.asarray(riesz_k)
    return float(np.max(np.abs(res))) if res.size else 0.0


def kernel_equation_residual(req, dt_probe, sample_points=None, tol=1e-13):
    """Residual of the kernel's own fractional Schrodinger equation in ``t_b``.

    The time derivative is a centred difference with step ``dt_probe``; the
    Riesz derivative in ``r_b`` is evaluated exactly through an extra
    ``|p|**alpha`` weight in the momentum integral. ``sample_points`` are
    separations ``r_b - r_a`` (default: the request's own separation).
    """
    if req.dim != 1 and req.dim != 3:
        raise NotImplementedError
    if not 0 < dt_probe < req.duration:
        raise ValueError("dt_probe must lie in (0, t_b - t_a)")
    pts = np.atleast_1d(req.distance if sample_points is None else np.asarray(sample_points, dtype=float))
    p = req.params
    later = kernel_values(p, pts, req.duration + dt_probe, req.dim, req.damping, tol=tol)
    earlier = kernel_values(p, pts, req.duration - dt_probe, req.dim, req.damping, tol=tol)
    riesz = kernel_values(p, pts, req.duration, req.dim, req.damping, power=p.alpha, tol=tol)
    return kernel_residual_from_values(later, earlier, riesz, dt_probe, p, req.damping)

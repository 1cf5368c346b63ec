"""Hot numeric loops: contour quadrature sums and Toeplitz products.

Each kernel has a numba implementation and a vectorized numpy twin with the
same signature. ``contour_sums`` and ``toeplitz_matvec`` are bound at import
time according to :mod:`fqm._backend`; both variants stay importable so the
benchmark and tests can compare them directly.
"""
import numpy as np

from ._backend import USE_NUMBA, njit, prange


def contour_sums_numpy(z0, dz, orient, sign, a, c, alpha, m, u, w):
    """Sum ``w * dt/du * dz * g(z0 + dz*u**3)`` over nodes and segments.

    ``g(p) = p**m * exp(i*sign*a*p - i*c*p**alpha)`` on the principal branch.
    Arrays ``z0, dz`` are ``(n, S)``; ``orient, sign`` are ``(S,)``; ``a`` is
    ``(n,)``. Segments starting at the origin take their logarithm from
    ``log(dz) + 3*log(u)`` so the endpoint never underflows.
    """
    n, nseg = z0.shape
    t = u**3
    wt = w * 3.0 * u * u
    logu3 = 3.0 * np.log(u)
    out = np.zeros(n, dtype=np.complex128)
    for s in range(nseg):
        zs = z0[:, s][:, None]
        ds = dz[:, s][:, None]
        live = ds[:, 0] != 0
        if not np.any(live):
            continue
        p = zs + ds * t[None, :]
        at_origin = (zs == 0)[:, 0] & live
        logp = np.empty_like(p)
        if np.any(at_origin):
            logp[at_origin] = np.log(ds[at_origin]) + logu3[None, :]
        rest = ~at_origin & live
        if np.any(rest):
            logp[rest] = np.log(p[rest])
        logp[~live] = 0.0
        expo = m * logp + 1j * sign[s] * a[:, None] * p - 1j * c * np.exp(alpha * logp)
        vals = np.exp(expo) @ wt
        out += np.where(live, orient[s] * ds[:, 0] * vals, 0.0)
    return out


def toeplitz_matvec_numpy(kvals, x, chunk=256):
    """``y[i] = sum_j kvals[i - j + M - 1] * x[j]`` for ``len(x) == M``."""
    m = x.shape[0]
    y = np.empty(m, dtype=np.complex128)
    cols = np.arange(m)
    for start in range(0, m, chunk):
        rows = np.arange(start, min(start + chunk, m))
        block = kvals[rows[:, None] - cols[None, :] + m - 1]
        y[rows] = block @ x
    return y


if USE_NUMBA:

    @njit(cache=True, parallel=True, fastmath=False)
    def contour_sums_numba(z0, dz, orient, sign, a, c, alpha, m, u, w):
        n, nseg = z0.shape
        nq = u.shape[0]
        out = np.zeros(n, dtype=np.complex128)
        for i in prange(n):
            acc = 0j
            for s in range(nseg):
                d = dz[i, s]
                if d == 0:
                    continue
                start = z0[i, s]
                seg = 0j
                for k in range(nq):
                    uk = u[k]
                    t = uk * uk * uk
                    if start == 0:
                        logp = np.log(d) + 3.0 * np.log(uk)
                    else:
                        logp = np.log(start + d * t)
                    p = start + d * t
                    expo = m * logp + 1j * sign[s] * a[i] * p - 1j * c * np.exp(alpha * logp)
                    seg += w[k] * 3.0 * uk * uk * np.exp(expo)
                acc += orient[s] * d * seg
            out[i] = acc
        return out

    @njit(cache=True, parallel=True)
    def toeplitz_matvec_numba(kvals, x):
        m = x.shape[0]
        y = np.empty(m, dtype=np.complex128)
        for i in prange(m):
            acc = 0j
            base = i + m - 1
            for j in range(m):
                acc += kvals[base - j] * x[j]
            y[i] = acc
        return y

    contour_sums = contour_sums_numba
    toeplitz_matvec = toeplitz_matvec_numba
else:
    contour_sums_numba = None
    toeplitz_matvec_numba = None
    contour_sums = contour_sums_numpy
    toeplitz_matvec = toeplitz_matvec_numpy

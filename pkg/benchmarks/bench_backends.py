"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_backends.py [--repeat 5] [--points 1024]

End-to-end timings with the numpy path forced can be had by re-running any
workload under ``FQM_DISABLE_NUMBA=1``.
"""
import argparse
import timeit

import numpy as np

from fqm import _kernels
from fqm.dynamics.kernel import _geometry, _gl_nodes


def contour_case(points, panels):
    a = np.ascontiguousarray(np.linspace(0.0, 20.0, points))
    c = complex(1.0, -0.1)
    alpha, m = 1.5, 0.0
    z0, dz, orient, sign = _geometry(a, c, alpha, m)
    u, w = _gl_nodes(panels)
    return (np.ascontiguousarray(z0), np.ascontiguousarray(dz), orient, sign, a, c, alpha, m, u, w)


def toeplitz_case(points, rng):
    kvals = rng.standard_normal(2 * points - 1) + 1j * rng.standard_normal(2 * points - 1)
    x = rng.standard_normal(points) + 1j * rng.standard_normal(points)
    return kvals, x


def best_of(func, args, repeat):
    func(*args)  # compile / warm caches
    return min(timeit.repeat(lambda: func(*args), number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--points", type=int, default=1024)
    parser.add_argument("--panels", type=int, default=32)
    args = parser.parse_args()
    if _kernels.contour_sums_numba is None:
        raise SystemExit("numba backend disabled (FQM_DISABLE_NUMBA is set); nothing to compare")

    rng = np.random.default_rng(0)
    cases = [
        ("contour_sums", _kernels.contour_sums_numpy, _kernels.contour_sums_numba, contour_case(args.points, args.panels)),
        ("toeplitz_matvec", _kernels.toeplitz_matvec_numpy, _kernels.toeplitz_matvec_numba, toeplitz_case(args.points, rng)),
    ]
    print(f"{'kernel':<16} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8} {'max rel diff':>13}")
    for name, slow, fast, case in cases:
        ref, out = slow(*case), fast(*case)
        diff = float(np.max(np.abs(ref - out)) / np.max(np.abs(ref)))
        t_np = best_of(slow, case, args.repeat)
        t_nb = best_of(fast, case, args.repeat)
        print(f"{name:<16} {t_np:>11.4f} {t_nb:>11.4f} {t_np / t_nb:>8.1f} {diff:>13.2e}")


if __name__ == "__main__":
    main()

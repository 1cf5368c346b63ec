"""Backend selection for the compiled kernels.

``FQM_DISABLE_NUMBA=1`` forces the pure-numpy path even when numba is
importable. ``FQM_THREADS`` caps the numba thread pool.
"""
import os
import warnings


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = not _flag("FQM_DISABLE_NUMBA")

if USE_NUMBA:
    try:
        import numba
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba could not be imported; using the numpy kernels")
        USE_NUMBA = False

if USE_NUMBA:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # Prefer layers that need no external runtime; an outdated TBB only warns.
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _threads = os.environ.get("FQM_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
else:
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

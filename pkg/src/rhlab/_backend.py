"""Backend selection for the numeric kernels.

``RHLAB_BACKEND=numpy`` forces the pure-numpy path; anything else (or unset)
uses numba when it imports cleanly.
"""
import os

BACKEND_ENV = "RHLAB_BACKEND"

try:
    import numba

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old and warns on every first parallel launch
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def requested_backend():
    name = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if name not in ("numba", "numpy"):
        name = "numba"
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


prange = numba.prange if HAVE_NUMBA else range


def set_workers(workers):
    """Set the numba thread pool size; returns the count actually used."""
    if workers is None:
        return None
    workers = max(1, int(workers))
    if HAVE_NUMBA:
        workers = min(workers, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(workers)
    return workers

"""
Thread configuration. Must run before numpy is imported: BLAS pools read
their size once, at load time.
"""
import os

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")
DEFAULT_THREADS = 1


def configure_threads() -> int:
    """Cap BLAS/numba workers at MSGV_THREADS (default 1); explicit per-library settings win."""
    raw = os.environ.get("MSGV_THREADS", str(DEFAULT_THREADS))
    try:
        threads = max(1, int(raw))
    except ValueError:
        threads = DEFAULT_THREADS
    for var in THREAD_VARS:
        os.environ.setdefault(var, str(threads))
    return threads

"""Backend selection for the hot kernels.

The environment variable CPSCODEC_BACKEND picks the implementation:

* ``auto``  (default) - numba if importable, else pure numpy
* ``numba`` - require numba, fail loudly if missing
* ``numpy`` - force the pure-numpy fallback

Both backends accumulate in the same fixed order and are bit-identical;
the flag only trades speed (see benchmarks/compare_backends.py).
"""

import os

_choice = os.environ.get("CPSCODEC_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"CPSCODEC_BACKEND must be auto|numba|numpy, got {_choice!r}")

has_numba = False
if _choice in ("auto", "numba"):
    try:
        import numba  # noqa: F401
        has_numba = True
    except ImportError:
        if _choice == "numba":
            raise

active_backend = "numba" if has_numba else "numpy"


def set_threads(n: int) -> None:
    """Set the kernel worker count. A no-op on the numpy backend.

    Outputs are bit-identical for every thread count: parallelism is only
    across output elements, never within one reduction.
    """
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if has_numba:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))

"""Backend selection for the hot kernels.

numba is used when importable unless ``EXPSTAB_BACKEND=numpy`` is set in the
environment. Both backends expose the same functions.
"""

import os

_requested = os.environ.get("EXPSTAB_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ImportError(f"EXPSTAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numpy"
if _requested == "numba":
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:  # numba missing: fall through to numpy
        _impl = None
if BACKEND == "numpy":
    from . import _kernels_numpy as _impl

NORM_CODES = {"l1": 0, "l2": 1, "linf": 2}
DUAL_NORM = {"l1": "linf", "l2": "l2", "linf": "l1"}

sweep_matrix_log_norms = _impl.sweep_matrix_log_norms
sweep_vector_log_norms = _impl.sweep_vector_log_norms
vector_row = _impl.vector_row
dual_column = _impl.dual_column
envelope_slope = _impl.envelope_slope
row_envelope_slopes = _impl.row_envelope_slopes

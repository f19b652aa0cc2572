"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting ``RCRP_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("RCRP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

coverage_counts = _impl.coverage_counts
covered_steps = _impl.covered_steps
move_deltas = _impl.move_deltas
apply_move = _impl.apply_move
slot_weights = _impl.slot_weights
lsap = _impl.lsap
unpack_columns = _impl.unpack_columns


def backends():
    """Mapping of available backend name to module."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out

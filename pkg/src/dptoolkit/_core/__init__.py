"""Numeric kernel backend selection.

The hot kernels (clipped pairwise row reduction, cyclic Jacobi sweeps) exist
twice: a compiled Cython extension and a pure NumPy fallback with identical
arithmetic order, so both produce bit-identical results. The compiled backend
is used when the extension built; set DP_TOOLKIT_BACKEND=pure or
DP_TOOLKIT_BACKEND=compiled to force one.
"""

import os

from . import _pure

_choice = os.environ.get("DP_TOOLKIT_BACKEND", "auto").lower()
if _choice not in ("auto", "pure", "compiled"):
    raise ValueError(f"DP_TOOLKIT_BACKEND must be auto, pure or compiled, got {_choice!r}")

_impl = _pure
BACKEND = "pure"
if _choice != "pure":
    try:
        from . import _speed

        _impl = _speed
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "DP_TOOLKIT_BACKEND=compiled but the dptoolkit._core._speed "
                "extension is not built; reinstall with a C compiler available"
            ) from None

fold_rows = _impl.fold_rows
row_sq_norms = _impl.row_sq_norms
clipped_fold = _impl.clipped_fold
jacobi_sweeps = _impl.jacobi_sweeps

__all__ = ["BACKEND", "fold_rows", "row_sq_norms", "clipped_fold", "jacobi_sweeps"]

"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting the environment
variable ``MATERNSPDE_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

if os.environ.get("MATERNSPDE_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
philox4x32 = _impl.philox4x32
philox_lanes = _impl.philox_lanes
ic0_factor = _impl.ic0_factor
lower_solve = _impl.lower_solve
upper_solve = _impl.upper_solve

__all__ = ["BACKEND", "philox4x32", "philox_lanes", "ic0_factor", "lower_solve",
           "upper_solve"]

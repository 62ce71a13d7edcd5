"""Select the Bessel kernel implementation at import.

The compiled ``_speedups`` module is used when it was built; setting
``RTCYL_PURE_PYTHON=1`` forces the reference Python kernels.
"""

import os

from . import _pykernels

if os.environ.get("RTCYL_PURE_PYTHON"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _speedups as kernels
    except ImportError:  # extension not built
        kernels = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

__all__ = ["kernels", "BACKEND"]

"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``DSMIL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from dsmil import _kernels_py

BACKEND = "python"
min_dist_tables = _kernels_py.min_dist_tables

if os.environ.get("DSMIL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from dsmil import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        min_dist_tables = _compiled.min_dist_tables

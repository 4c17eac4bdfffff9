"""Hot-loop kernels with backend selection at import.

The compiled extension is used when it was built; set ``SEMNAV_PURE_PYTHON=1``
to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _raycast_py

BACKEND = "python"
cast_rays = _raycast_py.cast_rays

if os.environ.get("SEMNAV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _raycast_ext
    except ImportError:
        pass
    else:
        cast_rays = _raycast_ext.cast_rays
        BACKEND = "cython"

__all__ = ["BACKEND", "cast_rays"]

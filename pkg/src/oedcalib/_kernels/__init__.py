"""Hot kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time from ``OED_CALIB_NUMBA``:
``0``/``false``/``off`` forces numpy, ``1``/``true``/``on`` requires numba,
anything else (the default) uses numba when it imports cleanly.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_flag = os.environ.get("OED_CALIB_NUMBA", "auto").strip().lower()

if _flag in ("0", "false", "off", "no"):
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _flag in ("1", "true", "on", "yes"):
            raise
        log.info("numba unavailable, using numpy kernels")
        _impl = _numpy
        BACKEND = "numpy"

quad_form_rows = _impl.quad_form_rows
weighted_gram = _impl.weighted_gram
radiochromic_grad = _impl.radiochromic_grad
inv_equilibrated = _impl.inv_equilibrated
wynn_gi = _impl.wynn_gi
wynn_vi = _impl.wynn_vi

__all__ = [
    "BACKEND",
    "quad_form_rows",
    "weighted_gram",
    "radiochromic_grad",
    "inv_equilibrated",
    "wynn_gi",
    "wynn_vi",
]

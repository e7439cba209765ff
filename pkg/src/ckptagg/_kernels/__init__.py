"""Hot kernels: compiled Cython core when built, pure Python otherwise.

Set ``CKPTAGG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("CKPTAGG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

exclusive_scan = _impl.exclusive_scan
endpoint_conflicts = _impl.endpoint_conflicts
fluid_run = _impl.fluid_run

__all__ = ["BACKEND", "exclusive_scan", "endpoint_conflicts", "fluid_run"]

"""Hot kernels: the compiled extension when it is built, else the Python fallback.

Set ``QBIN_PURE=1`` to force the fallback.
"""

import os

from . import _pure

if os.environ.get("QBIN_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _fast as _impl
    except ImportError:  # extension not built
        _impl = _pure

BACKEND = "cython" if _impl is not _pure else "python"

scan_match = _impl.scan_match
enumerate_assignments = _impl.enumerate_assignments

__all__ = ["BACKEND", "scan_match", "enumerate_assignments", "_pure"]

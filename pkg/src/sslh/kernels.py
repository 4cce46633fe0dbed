"""Backend selection for the hot kernels.

The compiled module is used when it imports; set ``SSLH_PURE_PYTHON=1`` to
force the pure-Python fallback.
"""

import os

from . import _kernels_py

if os.environ.get("SSLH_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
assign_edges = _impl.assign_edges
propagate_step = _impl.propagate_step


def backends():
    """Return the importable backends keyed by name."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found

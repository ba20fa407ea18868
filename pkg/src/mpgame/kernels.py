"""Backend selection for the hot kernels.

The compiled MPFR extension is used when importable; setting
MPGAME_PURE_PYTHON=1 forces the pure-Python fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("MPGAME_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        _impl = _ckernels
        BACKEND = "compiled"

Branches = _impl.Branches
PyBranches = _pykernels.Branches


def available_backends():
    out = {"python": _pykernels.Branches}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["compiled"] = _ckernels.Branches
    return out

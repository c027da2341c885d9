"""Pick the compiled kernels when importable, else the pure-Python ones.

Set ``DETWALK_PURE=1`` to force the fallback.
"""

import os

from detwalk import _pykernels

if os.environ.get("DETWALK_PURE", "").strip() not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from detwalk import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = "python" if kernels is _pykernels else "cython"


def available():
    """All importable kernel modules, keyed by backend name."""
    out = {"python": _pykernels}
    try:
        from detwalk import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out

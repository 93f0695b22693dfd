"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``RLOC_PURE_PYTHON=1`` is set, the pure-Python reference kernels are used.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RLOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

viterbi2 = _impl.viterbi2
layered_dp = _impl.layered_dp
fingerprint_scores = _impl.fingerprint_scores
jaccard_scan = _impl.jaccard_scan


def backends() -> dict:
    """All importable backends by name, for parity tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out

"""Backend selection for the hot kernels.

The compiled Cython module is used when it was built; otherwise, or when the
environment variable ``OAMSPDC_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the NumPy implementation is used. Both expose the same functions.
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_py = os.environ.get("OAMSPDC_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

overlap_batch = _impl.overlap_batch


def available_backends() -> dict:
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        out["cython"] = _kernels
    except ImportError:
        pass
    return out

"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. Setting ``BRWTRACE_PURE_PYTHON=1`` forces the fallback.
Both backends consume random numbers in the same order and return identical
results.
"""
import os

from . import _kernels_py

if os.environ.get("BRWTRACE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
PopulationOverflow = _kernels_py.PopulationOverflow
brw_occupation = _impl.brw_occupation
walk = _impl.walk
crossing_thresholds = _impl.crossing_thresholds

python_backend = _kernels_py

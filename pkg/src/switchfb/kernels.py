"""Selects the compiled simulator kernels when built, else the pure-Python fallback.

Set ``SWITCHFB_PURE_PYTHON=1`` to force the fallback.
"""
import os

try:
    if os.environ.get("SWITCHFB_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from ._kernels import box_probability, scan_typical

    BACKEND = "compiled"
except ImportError:
    from ._kernels_py import box_probability, scan_typical

    BACKEND = "python"

__all__ = ["BACKEND", "box_probability", "scan_typical"]

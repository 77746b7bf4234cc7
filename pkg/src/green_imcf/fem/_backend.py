"""Pick the compiled assembly kernel when available.

Set ``GREEN_IMCF_PURE=1`` to force the numpy implementation.
"""
import os

from . import _assembly_py

if os.environ.get("GREEN_IMCF_PURE", "").strip() not in ("", "0"):
    assemble = _assembly_py.assemble
    BACKEND = "numpy"
else:
    try:
        from ._assembly import assemble
        BACKEND = "cython"
    except ImportError:
        assemble = _assembly_py.assemble
        BACKEND = "numpy"

__all__ = ["assemble", "BACKEND"]

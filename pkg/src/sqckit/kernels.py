"""Kernel backend selection.

The compiled extension is used when it imports; set ``SQCKIT_PURE=1`` to
force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels


def _load_compiled():
    if os.environ.get("SQCKIT_PURE"):
        return None
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()
_active = _compiled if _compiled is not None else _pykernels

BACKEND: str = _active.NAME
oracle_scan = _active.oracle_scan
first_violation = _active.first_violation
min_ratio = _active.min_ratio


def backends() -> dict:
    """All importable backends by name (always includes ``"python"``)."""
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out

"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``SCHPACKET_BACKEND=python`` forces the pure-Python fallback.
"""
from __future__ import annotations

import os

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _fallback}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def available() -> list:
    return sorted(_BACKENDS)


def get(name: str | None = None):
    """Return the kernel module for ``name`` (default: best available)."""
    if name is None:
        name = os.environ.get("SCHPACKET_BACKEND", "").strip().lower() or None
    if name is None:
        return _BACKENDS.get("compiled", _fallback)
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; choose from {available()}")
    return _BACKENDS[name]


def name_of(module) -> str:
    return "compiled" if module is _ckernels and _ckernels is not None else "python"


ACTIVE = get()

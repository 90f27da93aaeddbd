"""Kernel backend selection.

The compiled extension is preferred when importable; the pure numpy backend
is the fallback. Set GRIDLIGHT_BACKEND=pure or =cython to force a choice.
"""

from __future__ import annotations

import os

from . import pure


def _load_compiled():
    try:
        from . import _ckernels
        return _ckernels
    except ImportError:
        return None


_compiled = _load_compiled()

_forced = os.environ.get("GRIDLIGHT_BACKEND", "").strip().lower()
if _forced == "pure":
    active = pure
elif _forced == "cython":
    if _compiled is None:
        raise ImportError("GRIDLIGHT_BACKEND=cython but the compiled extension is unavailable")
    active = _compiled
elif _forced:
    raise ImportError(f"unknown GRIDLIGHT_BACKEND {_forced!r}")
else:
    active = _compiled if _compiled is not None else pure


def backend_name() -> str:
    return active.NAME


def available():
    """Names of importable backends."""
    names = ["pure"]
    if _compiled is not None:
        names.append("cython")
    return names


def get_backend(name: str | None = None):
    if name is None:
        return active
    if name == "pure":
        return pure
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled backend not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

"""Kernel backend selection.

The compiled extension is used when it imports, unless the environment
variable ``EIGDPP_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None


def _default() -> str:
    if os.environ.get("EIGDPP_PURE_PYTHON", "") not in ("", "0"):
        return "python"
    return "cython" if _compiled is not None else "python"


BACKEND = _default()


def available() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_kernels(name: str | None = None) -> ModuleType:
    name = BACKEND if name is None else name
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")

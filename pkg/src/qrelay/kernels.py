"""Kernel backend selection.

The compiled extension is preferred when importable; set QRELAY_KERNEL=python
to force the pure-Python fallback.  Both backends implement exactly the same
contract (see _kernels_py) and are cross-checked in the test suite.
"""

import os

from . import _kernels_py

_FORCED = os.environ.get("QRELAY_KERNEL", "").strip().lower()

try:
    from . import _ckernels  # type: ignore[attr-defined]
except ImportError:
    _ckernels = None

if _FORCED == "python" or _ckernels is None:
    _active = _kernels_py
else:
    _active = _ckernels

two_mode_transform = _active.two_mode_transform
scale_mode_transform = _active.scale_mode_transform


def backend_name() -> str:
    return _active.BACKEND


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.append("compiled")
    return names


def set_backend(name: str) -> None:
    """Switch backends at runtime (used by the benchmark and the tests)."""
    global _active, two_mode_transform, scale_mode_transform
    if name == "python":
        _active = _kernels_py
    elif name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernel extension is not available")
        _active = _ckernels
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")
    two_mode_transform = _active.two_mode_transform
    scale_mode_transform = _active.scale_mode_transform

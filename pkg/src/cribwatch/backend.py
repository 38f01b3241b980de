"""Kernel backend selection.

The compiled extension (``_kernels_cy``) is preferred; the numpy fallback
(``_kernels_py``) is interchangeable. Override with CRIBWATCH_KERNELS=ext|py.
"""

import os

_choice = os.environ.get("CRIBWATCH_KERNELS", "auto").lower()

if _choice not in ("auto", "ext", "py"):
    raise RuntimeError(f"CRIBWATCH_KERNELS must be auto|ext|py, got {_choice!r}")

if _choice == "py":
    from . import _kernels_py as kernels

    NAME = "py"
else:
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]

        NAME = "ext"
    except ImportError:
        if _choice == "ext":
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        NAME = "py"


def get_backend(name=None):
    """Return a specific kernels module (for tests and benchmarks)."""
    if name in (None, "auto"):
        return kernels
    if name == "py":
        from . import _kernels_py

        return _kernels_py
    if name == "ext":
        from . import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")

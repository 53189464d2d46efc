"""Backend selection for the slice kernels.

The compiled extension ``_kernels`` is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` is used.  Setting the environment
variable ``OBSTACLE_LAB_BACKEND=python`` forces the fallback.
"""

import os

from . import _kernels_py

_FORCE_PYTHON = os.environ.get("OBSTACLE_LAB_BACKEND", "").lower() == "python"

if _FORCE_PYTHON:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

residual = _impl.residual
pgs_sweep = _impl.pgs_sweep
solve_step = _impl.solve_step


def get_backend(name=None):
    """Return the kernel module for ``name`` ("compiled" or "python").

    ``None`` returns the module selected at import.
    """
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    try:
        from . import _kernels  # type: ignore[attr-defined]  # noqa: F401
    except ImportError:
        return False
    return True

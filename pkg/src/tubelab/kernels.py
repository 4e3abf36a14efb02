"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``TUBELAB_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TUBELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

family_sweep = _impl.family_sweep
index_sweep = _impl.index_sweep


def use(backend: str) -> None:
    """Switch backend at runtime (``"python"`` or ``"cython"``); used by the benchmark."""
    global BACKEND, family_sweep, index_sweep
    if backend == "python":
        impl = _pykernels
    elif backend == "cython":
        from . import _ckernels as impl
    else:
        raise ValueError(f"unknown backend {backend!r}")
    BACKEND = backend
    family_sweep = impl.family_sweep
    index_sweep = impl.index_sweep

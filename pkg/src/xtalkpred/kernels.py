"""Hot-loop kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Set ``XTALKPRED_PURE=1``
to force the fallback (the test-suite runs both).
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("XTALKPRED_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def get(name, backend=None):
    """Return kernel ``name`` from ``backend`` ("cython", "python" or current)."""
    if backend is None:
        return getattr(_impl, name)
    if backend == "python":
        return getattr(_pykernels, name)
    from . import _ckernels
    return getattr(_ckernels, name)


def use(backend):
    """Switch every kernel to ``backend`` ("cython" or "python"); returns the previous one."""
    global BACKEND, _impl
    prev = BACKEND
    if backend == "python":
        _impl = _pykernels
    elif backend == "cython":
        from . import _ckernels
        _impl = _ckernels
    else:
        raise ValueError(f"unknown backend {backend!r}")
    BACKEND = backend
    return prev


def be_integrate(*args):
    return _impl.be_integrate(*args)


def modal_integrate(*args):
    return _impl.modal_integrate(*args)


def build_histograms(*args):
    return _impl.build_histograms(*args)


def ensemble_predict(*args):
    return _impl.ensemble_predict(*args)

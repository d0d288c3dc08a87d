"""Kernel dispatch: compiled extension when importable, NumPy otherwise.

The choice is made once at import.  Set ``IPDFP_KERNELS=python`` to force
the pure-Python path (``ext`` forces the extension and fails loudly if it
is missing).
"""
import os
import types

import numpy as np

from . import _kernels_py

try:
    from . import _kernels_ext
except ImportError:  # not built
    _kernels_ext = None

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "soft_threshold",
    "group_shrink",
    "logistic_prox",
    "diff2d",
    "diff2d_adjoint",
]


def _vec(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _full(p, n):
    if type(p) is float:
        return np.full(n, p)
    return np.ascontiguousarray(np.broadcast_to(np.asarray(p, dtype=np.float64), (n,)))


def _wrap_ext(mod):
    def soft_threshold(u, thr):
        u = _vec(u)
        return mod.soft_threshold(u, _full(thr, u.shape[0]))

    def group_shrink(a, b, thr):
        a, b = _vec(a), _vec(b)
        return mod.group_shrink(a, b, _full(thr, a.shape[0]))

    def logistic_prox(u, lam, y, c):
        u = _vec(u)
        n = u.shape[0]
        return mod.logistic_prox(u, _full(lam, n), _full(y, n), _full(c, n))

    def diff2d(x, h, w):
        return mod.diff2d(_vec(x), h, w)

    def diff2d_adjoint(g, h, w):
        return mod.diff2d_adjoint(_vec(g), h, w)

    return types.SimpleNamespace(
        name="ext",
        soft_threshold=soft_threshold,
        group_shrink=group_shrink,
        logistic_prox=logistic_prox,
        diff2d=diff2d,
        diff2d_adjoint=diff2d_adjoint,
    )


def _wrap_py(mod):
    return types.SimpleNamespace(
        name="python",
        soft_threshold=lambda u, thr: mod.soft_threshold(_vec(u), thr),
        group_shrink=lambda a, b, thr: mod.group_shrink(_vec(a), _vec(b), thr),
        logistic_prox=lambda u, lam, y, c: mod.logistic_prox(_vec(u), lam, y, c),
        diff2d=lambda x, h, w: mod.diff2d(_vec(x), h, w),
        diff2d_adjoint=lambda g, h, w: mod.diff2d_adjoint(_vec(g), h, w),
    )


_BACKENDS = {"python": _wrap_py(_kernels_py)}
if _kernels_ext is not None:
    _BACKENDS["ext"] = _wrap_ext(_kernels_ext)


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} not available (have {available_backends()})"
        ) from None


def _select():
    want = os.environ.get("IPDFP_KERNELS", "auto").lower()
    if want == "auto":
        return _BACKENDS.get("ext", _BACKENDS["python"])
    return get_backend(want)


_active = _select()
BACKEND = _active.name

soft_threshold = _active.soft_threshold
group_shrink = _active.group_shrink
logistic_prox = _active.logistic_prox
diff2d = _active.diff2d
diff2d_adjoint = _active.diff2d_adjoint

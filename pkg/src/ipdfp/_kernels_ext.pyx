# cython: language_level=3
"""Compiled twins of the kernels in ``_kernels_py``.

Signatures and return conventions match the NumPy versions exactly; the
dispatcher in ``ipdfp.kernels`` broadcasts scalar parameters to arrays
before calling in here.
"""
import numpy as np

from libc.math cimport exp, fabs, sqrt

cdef int NEWTON_MAX_ITER = 100
cdef double NEWTON_TOL = 1e-12


def soft_threshold(const double[::1] u, const double[::1] thr):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double ui, ti
    for i in range(n):
        ui = u[i]
        ti = thr[i]
        if ui > ti:
            o[i] = ui - ti
        elif ui < -ti:
            o[i] = ui + ti
        else:
            o[i] = 0.0
    return out


def group_shrink(const double[::1] a, const double[::1] b, const double[::1] thr):
    cdef Py_ssize_t i, n = a.shape[0]
    oa_arr = np.empty(n)
    ob_arr = np.empty(n)
    cdef double[::1] oa = oa_arr
    cdef double[::1] ob = ob_arr
    cdef double nrm, f
    for i in range(n):
        nrm = sqrt(a[i] * a[i] + b[i] * b[i])
        if nrm > 0.0:
            f = 1.0 - thr[i] / nrm
            if f < 0.0:
                f = 0.0
        else:
            f = 0.0
        oa[i] = a[i] * f
        ob[i] = b[i] * f
    return oa_arr, ob_arr


cdef inline double _tail(double s) nogil:
    cdef double e
    if s > 0.0:
        e = exp(-s)
        return e / (1.0 + e)
    return 1.0 / (1.0 + exp(s))


cdef double _solve_one(double u, double lc, double y, int* fallback) nogil:
    cdef double lo = u - lc, hi = u + lc, t = u, tn, r, g, dg
    cdef int k
    for k in range(NEWTON_MAX_ITER):
        r = _tail(y * t)
        g = t - u - lc * y * r
        if g == 0.0:
            return t
        dg = 1.0 + lc * r * (1.0 - r)
        if g < 0.0:
            lo = t
        else:
            hi = t
        tn = t - g / dg
        if tn <= lo or tn >= hi:
            tn = 0.5 * (lo + hi)
        if fabs(tn - t) <= NEWTON_TOL or hi - lo <= NEWTON_TOL:
            return tn
        t = tn
    fallback[0] += 1
    while hi - lo > NEWTON_TOL:
        t = 0.5 * (lo + hi)
        g = t - u - lc * y * _tail(y * t)
        if g < 0.0:
            lo = t
        else:
            hi = t
    return 0.5 * (lo + hi)


def logistic_prox(const double[::1] u, const double[::1] lam,
                  const double[::1] y, const double[::1] c):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef int fallback = 0
    for i in range(n):
        o[i] = _solve_one(u[i], lam[i] * c[i], y[i], &fallback)
    return out, fallback


def diff2d(const double[::1] x, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t i, j, p, hw = h * w
    out = np.zeros(2 * hw)
    cdef double[::1] o = out
    for i in range(h):
        for j in range(w):
            p = i * w + j
            if j < w - 1:
                o[p] = x[p + 1] - x[p]
            if i < h - 1:
                o[hw + p] = x[p + w] - x[p]
    return out


def diff2d_adjoint(const double[::1] g, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t i, j, p, hw = h * w
    out = np.zeros(hw)
    cdef double[::1] o = out
    for i in range(h):
        for j in range(w - 1):
            p = i * w + j
            o[p] -= g[p]
            o[p + 1] += g[p]
    for i in range(h - 1):
        for j in range(w):
            p = i * w + j
            o[p] -= g[hw + p]
            o[p + w] += g[hw + p]
    return out

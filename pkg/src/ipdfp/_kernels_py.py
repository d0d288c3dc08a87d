"""Pure NumPy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_kernels_ext`` module.  Inputs are 1-D float64 arrays; thresholds and
steps may be scalars or arrays broadcastable to the input.
"""
import numpy as np

NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-12


def soft_threshold(u, thr):
    return np.sign(u) * np.maximum(np.abs(u) - thr, 0.0)


def group_shrink(a, b, thr):
    """Shrink each pair ``(a[k], b[k])`` towards zero by ``thr[k]`` in l2 norm."""
    norm = np.hypot(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norm > 0.0, np.maximum(1.0 - thr / norm, 0.0), 0.0)
    return a * factor, b * factor


def _tail(s):
    # 1 / (1 + exp(s)) without overflow
    out = np.empty_like(s)
    pos = s > 0
    e = np.exp(-s[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(s[~pos]))
    return out


def logistic_prox(u, lam, y, c):
    """Solve ``t = u + lam*c*y / (1 + exp(y*t))`` elementwise.

    Safeguarded Newton inside the bracket ``[u - lam*c, u + lam*c]``.
    Returns ``(t, n_fallback)`` where ``n_fallback`` counts components for
    which Newton did not settle within the iteration cap and the bisection
    result was returned instead.
    """
    u = np.asarray(u, dtype=float)
    lc = np.broadcast_to(np.asarray(lam, dtype=float) * np.asarray(c, dtype=float), u.shape)
    y = np.broadcast_to(np.asarray(y, dtype=float), u.shape)
    lo = u - lc
    hi = u + lc
    t = u.copy()
    active = np.ones(u.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ti, ui, lci, yi = t[idx], u[idx], lc[idx], y[idx]
        r = _tail(yi * ti)
        g = ti - ui - lci * yi * r
        dg = 1.0 + lci * r * (1.0 - r)
        neg = g < 0.0
        lo[idx] = np.where(neg, ti, lo[idx])
        hi[idx] = np.where(neg | (g == 0.0), hi[idx], ti)
        step = g / dg
        tn = ti - step
        # an exact root (g == 0) collapses the bracket onto t; keep it
        out = ((tn <= lo[idx]) | (tn >= hi[idx])) & (g != 0.0)
        tn = np.where(out, 0.5 * (lo[idx] + hi[idx]), tn)
        t[idx] = tn
        done = (np.abs(tn - ti) <= NEWTON_TOL) | (hi[idx] - lo[idx] <= NEWTON_TOL) | (g == 0.0)
        active[idx[done]] = False
    n_fallback = int(active.sum())
    if n_fallback:
        idx = np.flatnonzero(active)
        a, b = lo[idx], hi[idx]
        while np.any(b - a > NEWTON_TOL):
            mid = 0.5 * (a + b)
            g = mid - u[idx] - lc[idx] * y[idx] * _tail(y[idx] * mid)
            a = np.where(g < 0.0, mid, a)
            b = np.where(g < 0.0, b, mid)
        t[idx] = 0.5 * (a + b)
    return t, n_fallback


def diff2d(x, h, w):
    img = x.reshape(h, w)
    out = np.zeros(2 * h * w)
    gx = out[: h * w].reshape(h, w)
    gy = out[h * w :].reshape(h, w)
    gx[:, :-1] = img[:, 1:] - img[:, :-1]
    gy[:-1, :] = img[1:, :] - img[:-1, :]
    return out


def diff2d_adjoint(g, h, w):
    gx = g[: h * w].reshape(h, w)
    gy = g[h * w :].reshape(h, w)
    out = np.zeros((h, w))
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out.ravel()

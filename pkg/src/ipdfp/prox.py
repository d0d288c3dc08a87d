"""Proximity operators.

``f.prox(lam, u)`` returns ``argmin_y lam*f(y) + 0.5*||u - y||^2``.  The
step ``lam`` is a positive scalar or, for separable functions, a positive
vector acting componentwise (the diagonal-metric prox).  Conjugate proxes
go through the Moreau identity

    prox_{lam f*}(u) = u - lam * prox_{f/lam}(u / lam).
"""
import numpy as np

from . import kernels

__all__ = [
    "ProxFunction",
    "Zero",
    "L1Norm",
    "SquaredL2",
    "Box",
    "GroupL2",
    "Logistic",
    "Scaled",
    "SeparableSum",
    "prox_l1",
    "prox_l1_shifted",
    "prox_conjugate",
    "project_consensus",
    "prox_logistic",
    "prox_group_l2",
]


def _check_step(lam, n=None):
    if type(lam) is float:
        if lam > 0 and lam != np.inf:
            return lam
        raise ValueError(f"step must be positive and finite, got {lam!r}")
    lam_arr = np.asarray(lam, dtype=float)
    if lam_arr.ndim > 1:
        raise ValueError("step must be a scalar or a 1-D vector")
    if not np.all(np.isfinite(lam_arr)) or np.any(lam_arr <= 0):
        raise ValueError(f"step must be positive and finite, got {lam!r}")
    if lam_arr.ndim == 1 and n is not None and lam_arr.shape[0] != n:
        raise ValueError(f"step vector has length {lam_arr.shape[0]}, expected {n}")
    return float(lam_arr) if lam_arr.ndim == 0 else lam_arr


class ProxFunction:
    """Convex function exposing its prox and, where cheap, its value.

    Subclasses implement ``_prox(lam, u)`` and ``_eval(x)``.  ``dim`` may be
    ``None`` for functions defined in any dimension.
    """

    separable = True

    def __init__(self, dim=None):
        self.dim = dim

    def _check_u(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim != 1:
            raise ValueError("expected a 1-D vector")
        if self.dim is not None and u.shape[0] != self.dim:
            raise ValueError(f"{type(self).__name__} has dim {self.dim}, got {u.shape[0]}")
        return u

    def prox(self, lam, u):
        u = self._check_u(u)
        return self.prox_unchecked(_check_step(lam, u.shape[0]), u)

    def conj_prox(self, lam, u):
        """Prox of the convex conjugate, via Moreau."""
        u = self._check_u(u)
        return self.conj_prox_unchecked(_check_step(lam, u.shape[0]), u)

    # The *_unchecked variants skip argument validation; the solver calls
    # them with steps that were validated once up front.
    def prox_unchecked(self, lam, u):
        if not self.separable and np.ndim(lam) == 1:
            lam = self._reduce_step(lam)
        return self._prox(lam, u)

    def conj_prox_unchecked(self, lam, u):
        return u - lam * self.prox_unchecked(1.0 / lam, u / lam)

    def __call__(self, x):
        return float(self._eval(self._check_u(x)))

    def scaled(self, c):
        return Scaled(self, c)

    def _reduce_step(self, lam):
        if np.all(lam == lam[0]):
            return float(lam[0])
        raise ValueError(
            f"{type(self).__name__} is not separable; a diagonal step must be constant"
        )

    def _prox(self, lam, u):
        raise NotImplementedError

    def _eval(self, x):
        raise NotImplementedError


class Zero(ProxFunction):
    def _prox(self, lam, u):
        return u.copy()

    def conj_prox_unchecked(self, lam, u):
        # f* is the indicator of {0}
        return np.zeros_like(u)

    def _eval(self, x):
        return 0.0


class L1Norm(ProxFunction):
    """``weight * ||x - shift||_1``."""

    def __init__(self, weight=1.0, shift=None, dim=None):
        if weight <= 0:
            raise ValueError("weight must be positive")
        if shift is not None:
            shift = np.array(shift, dtype=float)
            dim = shift.shape[0]
        super().__init__(dim)
        self.weight = float(weight)
        self.shift = shift

    def _prox(self, lam, u):
        if self.shift is None:
            return kernels.soft_threshold(u, self.weight * lam)
        return self.shift + kernels.soft_threshold(u - self.shift, self.weight * lam)

    def conj_prox_clamp(self, lam, u):
        """Closed form of the conjugate prox, used to cross-check Moreau.

        The conjugate of ``w*||x - b||_1`` is ``<b, y>`` plus the indicator of
        the l-infinity ball of radius ``w``.
        """
        u = self._check_u(u)
        lam = _check_step(lam, u.shape[0])
        if self.shift is not None:
            u = u - lam * self.shift
        return np.clip(u, -self.weight, self.weight)

    def _eval(self, x):
        r = x if self.shift is None else x - self.shift
        return self.weight * np.abs(r).sum()


class SquaredL2(ProxFunction):
    """``0.5 * weight * ||x - shift||^2``."""

    def __init__(self, weight=1.0, shift=None, dim=None):
        if weight <= 0:
            raise ValueError("weight must be positive")
        if shift is not None:
            shift = np.array(shift, dtype=float)
            dim = shift.shape[0]
        super().__init__(dim)
        self.weight = float(weight)
        self.shift = shift

    def _prox(self, lam, u):
        lw = lam * self.weight
        if self.shift is None:
            return u / (1.0 + lw)
        return (u + lw * self.shift) / (1.0 + lw)

    def _eval(self, x):
        r = x if self.shift is None else x - self.shift
        return 0.5 * self.weight * float(r @ r)


class Box(ProxFunction):
    """Indicator of ``[lo, hi]^n``; the prox is clipping and ignores ``lam``.

    ``atol`` lets evaluation tolerate round-off violations of the bounds.
    """

    def __init__(self, lo, hi, dim=None, atol=0.0):
        if not lo < hi:
            raise ValueError(f"empty box [{lo}, {hi}]")
        super().__init__(dim)
        self.lo = float(lo)
        self.hi = float(hi)
        self.atol = float(atol)

    def _prox(self, lam, u):
        return np.clip(u, self.lo, self.hi)

    def _eval(self, x):
        if np.all(x >= self.lo - self.atol) and np.all(x <= self.hi + self.atol):
            return 0.0
        return np.inf


class GroupL2(ProxFunction):
    """``weight * sum_k ||(u_a[k], u_b[k])||_2`` over pairs.

    ``layout="interleaved"`` pairs ``(u[2k], u[2k+1])``; ``layout="split"``
    pairs ``(u[k], u[k + p])``, which is how ``FirstDifference2D`` orders its
    horizontal and vertical differences.
    """

    separable = False

    def __init__(self, weight=1.0, layout="interleaved", dim=None):
        if weight <= 0:
            raise ValueError("weight must be positive")
        if layout not in ("interleaved", "split"):
            raise ValueError(f"unknown layout {layout!r}")
        super().__init__(dim)
        self.weight = float(weight)
        self.layout = layout

    def _pairs(self, u):
        if u.shape[0] % 2:
            raise ValueError(f"group-l2 needs an even length, got {u.shape[0]}")
        if self.layout == "interleaved":
            return u[0::2], u[1::2]
        p = u.shape[0] // 2
        return u[:p], u[p:]

    def _reduce_step(self, lam):
        a, b = self._pairs(lam)
        if np.all(a == b):
            return a
        raise ValueError("GroupL2: diagonal step must be constant within each pair")

    def _prox(self, lam, u):
        a, b = self._pairs(u)
        sa, sb = kernels.group_shrink(a, b, self.weight * lam)
        out = np.empty_like(u)
        oa, ob = self._pairs(out)
        oa[:] = sa
        ob[:] = sb
        return out

    def _eval(self, x):
        a, b = self._pairs(x)
        return self.weight * np.hypot(a, b).sum()


class Logistic(ProxFunction):
    """``sum_i c * log(1 + exp(-y_i * t_i))`` with labels ``y_i`` in {-1, +1}."""

    def __init__(self, labels, weight=1.0):
        labels = np.array(labels, dtype=float)
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if weight <= 0:
            raise ValueError("weight must be positive")
        super().__init__(labels.shape[0])
        labels.setflags(write=False)
        self.labels = labels
        self.weight = float(weight)

    def prox_with_info(self, lam, u):
        u = self._check_u(u)
        lam = _check_step(lam, u.shape[0])
        return kernels.logistic_prox(u, lam, self.labels, self.weight)

    def _prox(self, lam, u):
        return kernels.logistic_prox(u, lam, self.labels, self.weight)[0]

    def _eval(self, x):
        return self.weight * np.logaddexp(0.0, -self.labels * x).sum()


class Scaled(ProxFunction):
    """``c * f`` for ``c > 0``."""

    def __init__(self, f, c):
        if c <= 0:
            raise ValueError("scale must be positive")
        super().__init__(f.dim)
        self.f = f
        self.c = float(c)
        self.separable = f.separable

    def prox_unchecked(self, lam, u):
        return self.f.prox_unchecked(self.c * lam, u)

    def conj_prox_unchecked(self, lam, u):
        if isinstance(self.f, Zero):
            return self.f.conj_prox_unchecked(lam, u)
        return super().conj_prox_unchecked(lam, u)

    def _eval(self, x):
        return self.c * self.f._eval(x)


class SeparableSum(ProxFunction):
    """``sum_i f_i(u[slice_i])`` over consecutive slices of lengths ``dims``."""

    def __init__(self, parts, dims):
        parts = list(parts)
        dims = [int(d) for d in dims]
        if len(parts) != len(dims):
            raise ValueError("need one dimension per part")
        offsets = np.cumsum([0] + dims)
        super().__init__(int(offsets[-1]))
        self.parts = tuple(parts)
        self.slices = tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))

    def _step_slice(self, lam, s):
        return lam[s] if np.ndim(lam) == 1 else lam

    def prox_unchecked(self, lam, u):
        return np.concatenate(
            [
                f.prox_unchecked(self._step_slice(lam, s), u[s])
                for f, s in zip(self.parts, self.slices)
            ]
        )

    def conj_prox_unchecked(self, lam, u):
        return np.concatenate(
            [
                f.conj_prox_unchecked(self._step_slice(lam, s), u[s])
                for f, s in zip(self.parts, self.slices)
            ]
        )

    def _eval(self, x):
        return sum(f._eval(x[s]) for f, s in zip(self.parts, self.slices))


def prox_l1(lam, u):
    """Componentwise soft-threshold ``sign(u) * max(|u| - lam, 0)``."""
    return L1Norm().prox(lam, u)


def prox_l1_shifted(lam, u, b):
    u = np.asarray(u, dtype=float)
    b = np.asarray(b, dtype=float)
    if u.shape != b.shape:
        raise ValueError(f"shape mismatch: u {u.shape} vs b {b.shape}")
    return L1Norm(shift=b).prox(lam, u)


def prox_conjugate(f, lam, u):
    return f.conj_prox(lam, u)


def project_consensus(xs):
    """Replace every block by the componentwise mean of all blocks."""
    xs = [np.asarray(x, dtype=float) for x in xs]
    if not xs:
        raise ValueError("consensus projection of an empty list")
    if len({x.shape for x in xs}) != 1:
        raise ValueError("all blocks must have the same length")
    mean = np.mean(xs, axis=0)
    return [mean.copy() for _ in xs]


def prox_logistic(lam, u, y, c=1.0, return_info=False):
    """Prox of ``t -> c * log(1 + exp(-y t))`` at the scalar ``u``.

    With ``return_info`` the second value is ``True`` when Newton failed to
    settle and the bisection fallback produced the answer.
    """
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y!r}")
    lam = _check_step(lam)
    if c <= 0:
        raise ValueError("weight must be positive")
    t, nfb = kernels.logistic_prox(np.array([float(u)]), lam, float(y), float(c))
    if return_info:
        return float(t[0]), bool(nfb)
    return float(t[0])


def prox_group_l2(lam, u):
    return GroupL2(layout="interleaved").prox(lam, u)

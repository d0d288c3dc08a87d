"""Linear operators with forward and adjoint application.

All operators act on flat float64 vectors and are immutable after
construction.
"""
import csv

import numpy as np

from . import kernels

__all__ = [
    "DimensionError",
    "NormEstimateError",
    "LinearMap",
    "Identity",
    "Diagonal",
    "Dense",
    "FirstDifference1D",
    "FirstDifference2D",
    "StackedMap",
    "apply",
    "adjoint_apply",
    "estimate_norm",
    "first_difference_1d",
    "first_difference_2d",
    "identity",
    "load_matrix_csv",
    "NORM_SAFETY",
]

#: multiplicative inflation applied to power-iteration norms before they
#: enter a step-size inequality
NORM_SAFETY = 1.01


class DimensionError(ValueError):
    pass


class NormEstimateError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, msg, estimate, gap, iterate):
        super().__init__(msg)
        self.estimate = estimate
        self.gap = gap
        self.iterate = iterate


class LinearMap:
    """Base class: subclasses implement ``_apply`` and ``_adjoint``."""

    def __init__(self, in_dim, out_dim):
        if in_dim < 1 or out_dim < 1:
            raise DimensionError(f"dimensions must be positive, got {in_dim}->{out_dim}")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.in_dim,):
            raise DimensionError(
                f"{type(self).__name__}.apply expects length {self.in_dim}, got {u.shape}"
            )
        return self._apply(u)

    def adjoint(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.out_dim,):
            raise DimensionError(
                f"{type(self).__name__}.adjoint expects length {self.out_dim}, got {w.shape}"
            )
        return self._adjoint(w)

    def _apply(self, u):
        raise NotImplementedError

    def _adjoint(self, w):
        raise NotImplementedError

    def __call__(self, u):
        return self.apply(u)

    def abs_apply(self, u, p=1.0):
        """``|K|^p u`` with entrywise powers and the convention ``|0|^0 = 0``.

        The default goes through the dense matrix; structured operators
        override it so preconditioners never need to materialise ``K``.
        """
        return _abs_power(self.as_matrix(), p) @ np.asarray(u, dtype=float)

    def abs_adjoint(self, w, p=1.0):
        """``(|K|^p)^T w``, see :meth:`abs_apply`."""
        return _abs_power(self.as_matrix(), p).T @ np.asarray(w, dtype=float)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    def as_matrix(self):
        """Dense ``out_dim x in_dim`` matrix, built column by column."""
        eye = np.eye(self.in_dim)
        return np.column_stack([self._apply(eye[:, j]) for j in range(self.in_dim)])

    def __repr__(self):
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


def _abs_power(A, p):
    A = np.abs(A)
    with np.errstate(divide="ignore"):
        return np.where(A > 0, A**p, 0.0)


class Identity(LinearMap):
    def __init__(self, n):
        super().__init__(n, n)

    def _apply(self, u):
        return u.copy()

    def _adjoint(self, w):
        return w.copy()

    def as_matrix(self):
        return np.eye(self.in_dim)

    def abs_apply(self, u, p=1.0):
        return np.array(u, dtype=float)

    abs_adjoint = abs_apply


class Diagonal(LinearMap):
    def __init__(self, d):
        d = np.array(d, dtype=float).ravel()
        super().__init__(d.size, d.size)
        d.setflags(write=False)
        self.d = d

    def _apply(self, u):
        return self.d * u

    def _adjoint(self, w):
        return self.d * w

    def as_matrix(self):
        return np.diag(self.d)

    def abs_apply(self, u, p=1.0):
        return _abs_power(self.d, p) * np.asarray(u, dtype=float)

    abs_adjoint = abs_apply


class Dense(LinearMap):
    def __init__(self, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2:
            raise DimensionError(f"dense operator needs a 2-D array, got ndim={A.ndim}")
        super().__init__(A.shape[1], A.shape[0])
        A.setflags(write=False)
        self.A = A

    def _apply(self, u):
        return self.A @ u

    def _adjoint(self, w):
        return self.A.T @ w

    def as_matrix(self):
        return self.A.copy()


class FirstDifference1D(LinearMap):
    """Forward differences ``(u[1]-u[0], ..., u[n-1]-u[n-2])``."""

    def __init__(self, n):
        if n < 2:
            raise DimensionError("1-D difference needs at least 2 samples")
        super().__init__(n, n - 1)

    def _apply(self, u):
        return np.diff(u)

    def _adjoint(self, w):
        out = np.zeros(self.in_dim)
        out[:-1] -= w
        out[1:] += w
        return out

    # every nonzero entry has magnitude one, so p plays no role
    def abs_apply(self, u, p=1.0):
        u = np.asarray(u, dtype=float)
        return u[:-1] + u[1:]

    def abs_adjoint(self, w, p=1.0):
        out = np.zeros(self.in_dim)
        out[:-1] += w
        out[1:] += w
        return out


class FirstDifference2D(LinearMap):
    """Forward differences of a row-major ``height x width`` image.

    Output is the horizontal difference image followed by the vertical
    one, each ``height*width`` long; the last column (resp. row) of each is
    zero.
    """

    def __init__(self, height, width):
        if height < 1 or width < 1:
            raise DimensionError(f"image size must be positive, got {height}x{width}")
        super().__init__(height * width, 2 * height * width)
        self.height = int(height)
        self.width = int(width)

    def _apply(self, u):
        return kernels.diff2d(u, self.height, self.width)

    def _adjoint(self, w):
        return kernels.diff2d_adjoint(w, self.height, self.width)

    def abs_apply(self, u, p=1.0):
        img = np.asarray(u, dtype=float).reshape(self.height, self.width)
        hz = np.zeros_like(img)
        vt = np.zeros_like(img)
        hz[:, :-1] = img[:, :-1] + img[:, 1:]
        vt[:-1, :] = img[:-1, :] + img[1:, :]
        return np.concatenate([hz.ravel(), vt.ravel()])

    def abs_adjoint(self, w, p=1.0):
        n = self.in_dim
        w = np.asarray(w, dtype=float)
        hz = w[:n].reshape(self.height, self.width)
        vt = w[n:].reshape(self.height, self.width)
        out = np.zeros((self.height, self.width))
        out[:, :-1] += hz[:, :-1]
        out[:, 1:] += hz[:, :-1]
        out[:-1, :] += vt[:-1, :]
        out[1:, :] += vt[:-1, :]
        return out.ravel()


class StackedMap(LinearMap):
    """Vertical concatenation ``[K_1; ...; K_m]`` of maps with a common domain."""

    def __init__(self, blocks):
        blocks = list(blocks)
        if not blocks:
            raise DimensionError("StackedMap needs at least one block")
        n = blocks[0].in_dim
        for i, b in enumerate(blocks):
            if b.in_dim != n:
                raise DimensionError(f"block {i} has in_dim {b.in_dim}, expected {n}")
        offsets = np.cumsum([0] + [b.out_dim for b in blocks])
        super().__init__(n, int(offsets[-1]))
        self.blocks = tuple(blocks)
        self.slices = tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))

    def _apply(self, u):
        return np.concatenate([b._apply(u) for b in self.blocks])

    def _adjoint(self, w):
        out = self.blocks[0]._adjoint(w[self.slices[0]])
        for b, s in zip(self.blocks[1:], self.slices[1:]):
            out = out + b._adjoint(w[s])
        return out

    def split(self, w):
        return [w[s] for s in self.slices]

    def as_matrix(self):
        return np.vstack([b.as_matrix() for b in self.blocks])

    def abs_apply(self, u, p=1.0):
        return np.concatenate([b.abs_apply(u, p) for b in self.blocks])

    def abs_adjoint(self, w, p=1.0):
        out = self.blocks[0].abs_adjoint(w[self.slices[0]], p)
        for b, s in zip(self.blocks[1:], self.slices[1:]):
            out = out + b.abs_adjoint(w[s], p)
        return out


def identity(n):
    return Identity(n)


def first_difference_1d(n):
    return FirstDifference1D(n)


def first_difference_2d(height, width):
    return FirstDifference2D(height, width)


def apply(K, u):
    return K.apply(u)


def adjoint_apply(K, w):
    return K.adjoint(w)


def _start_vector(n):
    # Fixed seed: the all-ones vector lies in the kernel of every difference
    # operator, so a seeded Gaussian is used instead.
    v = np.random.default_rng(20240601).standard_normal(n)
    return v / np.linalg.norm(v)


def estimate_norm(K, tol=1e-8, max_iter=10000):
    """Spectral norm of ``K`` by power iteration on ``K*K``.

    The start vector is fixed, so repeated calls return identical values.
    Iteration stops once the relative change of the estimate drops below
    ``tol / 10``.

    Raises
    ------
    NormEstimateError
        If the tolerance is not met within ``max_iter`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _start_vector(K.in_dim)
    est = 0.0
    gap = np.inf
    for _ in range(max_iter):
        Kx = K.apply(x)
        new = float(np.linalg.norm(Kx))
        if new == 0.0:
            return 0.0
        gap = abs(new - est) / new
        est = new
        if gap <= 0.1 * tol:
            return est
        x = K.adjoint(Kx)
        x /= np.linalg.norm(x)
    raise NormEstimateError(
        f"power iteration stalled after {max_iter} iterations (relative gap {gap:.3e})",
        est,
        gap,
        x,
    )


def load_matrix_csv(path):
    """Read a dense matrix from comma-separated rows without header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no matrix rows")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    return Dense(rows)

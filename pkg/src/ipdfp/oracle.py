"""Independent references for tests and acceptance checks.

Nothing here calls into :mod:`ipdfp.solver` or :mod:`ipdfp.precond`: the
grid oracle needs only function values, and the reference solvers have
their own iteration loops and compute operator norms by dense SVD.
"""
from dataclasses import dataclass

import numpy as np

from .prox import ProxFunction, Zero
from .solver import CONSENSUS

__all__ = [
    "GridSpec",
    "prox_oracle",
    "ReferenceResult",
    "reference_solve",
    "cp_reference_step",
    "inertial_fb_step",
    "proximal_gradient_logreg",
]


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    pitch: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if not 0 < self.pitch <= self.hi - self.lo:
            raise ValueError(f"pitch {self.pitch} must lie in (0, hi - lo]")

    def points(self):
        n = int(np.floor((self.hi - self.lo) / self.pitch + 1e-9)) + 1
        return self.lo + self.pitch * np.arange(n)


def _grid_argmin_1d(obj, pts):
    vals = obj(pts[:, None])
    i = int(np.argmin(vals))
    return pts[i : i + 1], i in (0, pts.size - 1)


def _grid_argmin_2d(obj, pa, pb):
    A, B = np.meshgrid(pa, pb, indexing="ij")
    vals = obj(np.stack([A.ravel(), B.ravel()], axis=1))
    i = int(np.argmin(vals))
    ia, ib = divmod(i, pb.size)
    edge = ia in (0, pa.size - 1) or ib in (0, pb.size - 1)
    return np.array([pa[ia], pb[ib]]), edge


def prox_oracle(f, lam, u, grid, return_info=False):
    """Brute-force ``argmin_y lam*f(y) + 0.5*||u - y||^2`` over a grid.

    ``f`` maps an ``(k, d)`` array of candidate points to ``k`` values
    (``+inf`` allowed).  In 1-D the whole grid is searched.  In 2-D a full
    grid at that pitch is too large, so the search runs on a coarse grid
    over ``[lo, hi]^2`` and then on a window of the fine grid around the
    coarse winner; the objective is strongly convex, so the window always
    contains the fine-grid minimiser.  Ties go to the lexicographically
    smallest point.  With ``return_info`` a flag reports whether the winner
    sits on the outer grid boundary (the grid may not bracket the
    minimiser).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    d = u.shape[0]
    if d not in (1, 2):
        raise ValueError("grid oracle supports dimension 1 or 2 only")

    def obj(Y):
        return lam * np.asarray(f(Y), dtype=float) + 0.5 * ((Y - u) ** 2).sum(axis=1)

    fine = grid.points()
    if d == 1:
        y, edge = _grid_argmin_1d(obj, fine)
    else:
        # coarse-to-fine: each stage searches +-4 previous pitches at a
        # pitch 20x smaller, ending on points of the requested grid
        step = max(grid.pitch, (grid.hi - grid.lo) / 400.0)
        coarse = GridSpec(grid.lo, grid.hi, step).points()
        y, _ = _grid_argmin_2d(obj, coarse, coarse)
        while step > grid.pitch:
            w = 4 * step
            step = max(grid.pitch, step / 20.0)
            if step == grid.pitch:
                def window(c):
                    return fine[(fine >= c - w) & (fine <= c + w)]
            else:
                def window(c):
                    pts = c - w + step * np.arange(int(round(2 * w / step)) + 1)
                    return pts[(pts >= grid.lo) & (pts <= grid.hi)]
            y, _ = _grid_argmin_2d(obj, window(y[0]), window(y[1]))
        edge = bool(np.any(y <= fine[0]) or np.any(y >= fine[-1]))
    if return_info:
        return y, bool(edge)
    return y


@dataclass
class ReferenceResult:
    x: np.ndarray
    objective: float
    residual: float
    iterations: int
    confident: bool


def _primal_and_duals(problem):
    blocks = list(problem.blocks)
    G = problem.G if problem.G is not None else Zero()
    H = problem.H if isinstance(problem.H, ProxFunction) else None
    if H is not None and isinstance(G, Zero):
        primal = H
    elif H is not None and not isinstance(H, Zero):
        from .linop import identity

        blocks.append((identity(problem.primal_dim), H))
        primal = G
    else:
        primal = G
    return primal, blocks


def reference_solve(problem, budget=200000, x0=None, record_every=10, stall_tol=1e-15):
    """Plain Chambolle-Pock on ``primal(x) + sum_i F_i(K_i x)``.

    ``G`` (or ``H`` when ``G`` is absent) is handled by its prox; every
    other term becomes a dual block.  Steps are ``sigma = tau = sqrt(0.5)/||K||``
    with ``||K||`` from a dense SVD, so ``sigma*tau*||K||^2 = 0.5``.  Returns the
    best-objective iterate seen; stops early once an iteration moves the
    state by less than ``stall_tol`` relative.
    """
    if problem.H is not None and problem.H is not CONSENSUS and not isinstance(
        problem.H, ProxFunction
    ):
        raise TypeError("unsupported H")
    primal, blocks = _primal_and_duals(problem)
    n = problem.primal_dim
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if not blocks:
        return ReferenceResult(x, problem.objective(x), 0.0, 0, True)
    Kd = np.vstack([K.as_matrix() for K, _ in blocks])
    L = np.linalg.norm(Kd, 2)
    if L == 0:
        L = 1.0
    sigma = tau = np.sqrt(0.5) / L
    offsets = np.cumsum([0] + [K.out_dim for K, _ in blocks])
    sl = [slice(a, b) for a, b in zip(offsets[:-1], offsets[1:])]
    v = np.zeros(offsets[-1])
    best_x, best_obj = x.copy(), problem.objective(x)
    res = np.inf
    it = 0
    for it in range(1, budget + 1):
        x_new = primal.prox(sigma, x - sigma * (Kd.T @ v))
        u = v + tau * (Kd @ (2 * x_new - x))
        v_new = np.concatenate([F.conj_prox(tau, u[s]) for (_, F), s in zip(blocks, sl)])
        res = np.sqrt(np.sum((x_new - x) ** 2) / sigma + np.sum((v_new - v) ** 2) / tau)
        x, v = x_new, v_new
        scale = 1.0 + np.sqrt(np.sum(x**2) / sigma + np.sum(v**2) / tau)
        stalled = res <= stall_tol * scale
        if it % record_every == 0 or stalled or it == budget:
            obj = problem.objective(x)
            if obj <= best_obj:
                best_x, best_obj = x.copy(), obj
        if stalled:
            break
    return ReferenceResult(best_x, float(best_obj), float(res), it, bool(res <= 1e-10 * scale))


def cp_reference_step(x, v, K, prox_h, prox_fstar, sigma, tau):
    """One Chambolle-Pock step ``x' = prox_{sigma H}(x - sigma K* v)``, ``v' = prox_{tau F*}(v + tau K(2x' - x))``."""
    x_new = prox_h(sigma, x - sigma * K.adjoint(v))
    v_new = prox_fstar(tau, v + tau * K.apply(2 * x_new - x))
    return x_new, v_new


def inertial_fb_step(x, x_prev, prox_g, grad_f, step, alpha):
    """Inertial forward-backward: ``xi = x + alpha (x - x_prev)``, ``x' = prox_{step g}(xi - step grad_f(xi))``."""
    xi = x + alpha * (x - x_prev)
    return prox_g(step, xi - step * grad_f(xi))


def proximal_gradient_logreg(A, y, tau, iters=200000, tol=1e-15):
    """ISTA for ``mean log(1 + exp(-y * A x)) + tau ||x||_1``.

    Step ``1/L`` with ``L = ||A||_2^2 / (4 m)``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m = A.shape[0]
    L = np.linalg.norm(A, 2) ** 2 / (4.0 * m)
    t = 1.0 / L
    x = np.zeros(A.shape[1])
    for _ in range(iters):
        z = y * (A @ x)
        # d/dz log(1 + e^-z) = -1 / (1 + e^z)
        g = A.T @ (-y / (1.0 + np.exp(z))) / m
        u = x - t * g
        x_new = np.sign(u) * np.maximum(np.abs(u) - t * tau, 0.0)
        if np.max(np.abs(x_new - x)) <= tol * (1.0 + np.max(np.abs(x))):
            x = x_new
            break
        x = x_new
    obj = float(np.mean(np.log1p(np.exp(-y * (A @ x)))) + tau * np.abs(x).sum())
    return x, obj

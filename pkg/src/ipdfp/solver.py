"""Inertial primal-dual fixed point iterations.

Solves ``min_x F(Kx) + G(x) + H(x)`` (``ipdfp``) and the split problem
``min_x sum_i F_i(K_i x) + G(x)`` over a consensus variable (``sipdfp``).
One step from ``z = (x, y, v)`` with lag ``z_prev``:

    xi, eta, nu = z + alpha_k (z - z_prev)
    x~ = prox_{sigma H}(xi - sigma eta - sigma K* nu)
    y~ = prox_{gamma G*}(eta + gamma w_y)
    v~ = prox_{tau F*}(nu + tau K w_v)
    z+ = rho_k z~ + (1 - rho_k) z

``rule="condat"`` uses ``w_y = w_v = 2 x~ - xi``, which makes ``z~`` the
resolvent of the monotone saddle operator in the ``P`` metric.
``rule="as_written"`` uses ``w_y = xi`` and ``w_v = 2 x~ - eta``.  Steps may
be scalars or diagonal vectors (preconditioned variants); the arithmetic is
identical.
"""
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import precond
from .linop import StackedMap
from .prox import SeparableSum, Zero

__all__ = [
    "CONSENSUS",
    "DivergenceError",
    "IterTriple",
    "InertialSchedule",
    "SolveOptions",
    "ConvergenceRecord",
    "SolveResult",
    "rho_upper_bound",
    "delta_hat_lower_bound",
    "suggest_schedule",
    "ipdfp_step",
    "sipdfp_step",
    "run",
]

RULES = ("as_written", "condat")


class _Consensus:
    """Marker for ``H`` = indicator of the consensus set."""

    def __repr__(self):
        return "CONSENSUS"


CONSENSUS = _Consensus()


class DivergenceError(RuntimeError):
    def __init__(self, msg, records):
        super().__init__(msg)
        self.records = records


class IterTriple(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray

    def __sub__(self, other):
        return IterTriple(self.x - other.x, self.y - other.y, self.v - other.v)

    def copy(self):
        return IterTriple(self.x.copy(), self.y.copy(), self.v.copy())

    @classmethod
    def zeros(cls, n, p):
        return cls(np.zeros(n), np.zeros(n), np.zeros(p))


def delta_hat_lower_bound(alpha, theta):
    return (alpha**2 * (1 + alpha) + alpha * theta) / (1 - alpha**2)


def rho_upper_bound(alpha, theta, delta_hat):
    """Strict upper bound on a constant relaxation parameter.

    ``(d - a[a(1+a) + a d + t]) / (d [1 + a(1+a) + a d + t])`` with
    ``a = alpha``, ``t = theta``, ``d = delta_hat``.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    low = delta_hat_lower_bound(alpha, theta)
    if not delta_hat > low or delta_hat <= 0:
        raise ValueError(f"delta_hat={delta_hat} must exceed {low} (and be positive)")
    bracket = alpha * (1 + alpha) + alpha * delta_hat + theta
    return (delta_hat - alpha * bracket) / (delta_hat * (1 + bracket))


@dataclass(frozen=True)
class InertialSchedule:
    """Two-value inertia (0 on the first step, ``alpha`` afterwards) and constant relaxation."""

    alpha: float
    theta: float
    delta_hat: float
    rho: float

    def check(self):
        bound = rho_upper_bound(self.alpha, self.theta, self.delta_hat)
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if not 0 < self.rho < bound:
            raise ValueError(f"rho={self.rho} must lie in (0, {bound})")
        return self

    def alpha_k(self, k):
        """Inertia of step ``k`` (1-based)."""
        return 0.0 if k <= 1 else self.alpha


def suggest_schedule(alpha, theta=0.01):
    """Admissible schedule: ``delta_hat`` twice its lower bound, ``rho`` at 99% of its bound."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    delta_hat = max(2.0 * delta_hat_lower_bound(alpha, theta), 1e-6)
    rho = 0.99 * rho_upper_bound(alpha, theta, delta_hat)
    return InertialSchedule(alpha, theta, delta_hat, rho).check()


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 10000
    tol: float = 1e-10
    rule: str = "condat"
    record_every: int = 10
    divergence_factor: float = 1e6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")


@dataclass(frozen=True)
class ConvergenceRecord:
    iter: int
    objective: float
    km_residual_P: float
    primal_change: float
    elapsed_ms: float


@dataclass
class SolveResult:
    x: np.ndarray
    records: list
    reason: str
    iterations: int
    state: IterTriple
    residual: float
    metric: object = field(repr=False, default=None)
    schedule: object = field(repr=False, default=None)


def _require_validated(metric):
    if not getattr(metric, "validated", False):
        raise precond.InvalidMetricError("solver steps need a validated metric")


def _extrapolate(z, z_prev, alpha_k):
    return IterTriple(
        z.x + alpha_k * (z.x - z_prev.x),
        z.y + alpha_k * (z.y - z_prev.y),
        z.v + alpha_k * (z.v - z_prev.v),
    )


def _relax(zt, z, rho_k):
    return IterTriple(
        rho_k * zt.x + (1 - rho_k) * z.x,
        rho_k * zt.y + (1 - rho_k) * z.y,
        rho_k * zt.v + (1 - rho_k) * z.v,
    )


def ipdfp_step(z, z_prev, K, prox_h, prox_gstar, prox_fstar, metric, alpha_k, rho_k, rule="condat"):
    """One inertial primal-dual step; returns ``(z_next, z_tilde)``.

    ``prox_h(step, u)``, ``prox_gstar(step, u)`` and ``prox_fstar(step, u)``
    are the proxes of ``H``, ``G*`` and ``F*``.
    """
    _require_validated(metric)
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if z.x.shape[0] != K.in_dim or z.v.shape[0] != K.out_dim or z.y.shape != z.x.shape:
        raise ValueError("state dimensions do not match the operator")
    sig, gam, tau = metric.sigma, metric.gamma, metric.tau
    xi, eta, nu = _extrapolate(z, z_prev, alpha_k)
    xt = prox_h(sig, xi - sig * eta - sig * K.adjoint(nu))
    if rule == "condat":
        bar = 2 * xt - xi
        yt = prox_gstar(gam, eta + gam * bar)
        vt = prox_fstar(tau, nu + tau * K.apply(bar))
    else:
        yt = prox_gstar(gam, eta + gam * xi)
        vt = prox_fstar(tau, nu + tau * K.apply(2 * xt - eta))
    zt = IterTriple(xt, yt, vt)
    return _relax(zt, z, rho_k), zt


def sipdfp_step(z, z_prev, Ks, prox_gstar, prox_fstars, metric, alpha_k, rho_k, rule="condat"):
    """One split step over ``m`` blocks; returns ``(z_next, z_tilde)``.

    ``z.v`` stacks the block duals ``v_1..v_m``.  ``prox_gstar`` must be the
    conjugate prox of the per-copy share ``G/m``.  Block dual updates read
    only shared inputs and their own block, so their order is immaterial.
    """
    _require_validated(metric)
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    Ks = list(Ks)
    m = len(Ks)
    if m == 0 or len(prox_fstars) != m:
        raise ValueError(f"need one conjugate prox per block ({m} blocks, {len(prox_fstars)} proxes)")
    offsets = np.cumsum([0] + [k.out_dim for k in Ks])
    if z.v.shape[0] != offsets[-1]:
        raise ValueError(f"dual state has length {z.v.shape[0]}, blocks need {offsets[-1]}")
    slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
    sig, gam = metric.sigma, metric.gamma
    xi, eta, nu = _extrapolate(z, z_prev, alpha_k)
    acc = Ks[0].adjoint(nu[slices[0]])
    for K, s in zip(Ks[1:], slices[1:]):
        acc = acc + K.adjoint(nu[s])
    xt = xi - sig * eta - sig * acc / m
    if rule == "condat":
        bar = 2 * xt - xi
        yt = prox_gstar(gam, eta + gam * bar)
    else:
        yt = prox_gstar(gam, eta + gam * xi)
        bar = 2 * xt - eta
    vt = np.empty_like(nu)
    for K, s, pf in zip(Ks, slices, prox_fstars):
        tau = metric.tau_block(s)
        vt[s] = pf(tau, nu[s] + tau * K.apply(bar))
    zt = IterTriple(xt, yt, vt)
    return _relax(zt, z, rho_k), zt


def _conj_or_zero(f):
    if f is None:
        f = Zero()
    return f.conj_prox_unchecked


def _prox_or_identity(f):
    if f is None or isinstance(f, Zero):
        return lambda step, u: u
    return f.prox_unchecked


def run(problem, metric, schedule=None, options=None, algorithm=None, x0=None):
    """Iterate until the relative ``P``-norm fixed-point residual drops below ``options.tol``.

    ``algorithm`` defaults to ``"sipdfp"`` when the problem's ``H`` is
    :data:`CONSENSUS` and ``"ipdfp"`` otherwise.  An unvalidated metric is
    validated against the problem's operators first.

    Raises
    ------
    DivergenceError
        When the residual grows past ``divergence_factor`` times the first
        nonzero residual.
    """
    options = options or SolveOptions()
    schedule = (schedule or suggest_schedule(0.0)).check()
    Ks = [K for K, _ in problem.blocks]
    Fs = [F for _, F in problem.blocks]
    if algorithm is None:
        algorithm = "sipdfp" if problem.H is CONSENSUS else "ipdfp"
    if algorithm not in ("ipdfp", "sipdfp"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if not metric.validated:
        metric = precond.check_metric(metric, Ks)
    n = problem.primal_dim
    p = sum(K.out_dim for K in Ks)

    if algorithm == "ipdfp":
        if problem.H is CONSENSUS:
            raise ValueError("ipdfp cannot handle the consensus marker; use sipdfp")
        Kstack = StackedMap(Ks)
        F = SeparableSum(Fs, [K.out_dim for K in Ks])
        prox_h = _prox_or_identity(problem.H)
        prox_g = _conj_or_zero(problem.G)
        prox_f = F.conj_prox_unchecked
        copies = 1

        def step(z, zp, a, r):
            return ipdfp_step(z, zp, Kstack, prox_h, prox_g, prox_f, metric, a, r, options.rule)

    else:
        if problem.H is not CONSENSUS and problem.H is not None and not isinstance(problem.H, Zero):
            raise ValueError("sipdfp requires H to be the consensus indicator")
        m = len(Ks)
        Kstack = StackedMap(Ks)
        G = problem.G if problem.G is not None else Zero()
        prox_g = G.scaled(1.0 / m).conj_prox_unchecked
        prox_fs = [F.conj_prox_unchecked for F in Fs]
        copies = m

        def step(z, zp, a, r):
            return sipdfp_step(z, zp, Ks, prox_g, prox_fs, metric, a, r, options.rule)

    x_init = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    z = IterTriple(x_init, np.zeros(n), np.zeros(p))
    z_prev = z
    norm0 = precond.metric_norm(metric, Kstack, z, copies)
    scale = 1.0 + norm0

    records = []
    t0 = time.perf_counter()
    first_res = None
    reason = "max_iter"
    res = math.nan
    k = 0
    for k in range(1, options.max_iter + 1):
        z_new, _ = step(z, z_prev, schedule.alpha_k(k), schedule.rho)
        diff = z_new - z
        res = _residual(metric, Kstack, diff, copies)
        if res is None:
            records.append(_record(problem, k, z_new, math.nan, diff, t0))
            raise DivergenceError(
                f"<dz, P dz> < 0 at iteration {k}: the step metric is not positive definite",
                records,
            )
        if not math.isfinite(res):
            raise DivergenceError(f"non-finite residual at iteration {k}", records)
        if first_res is None and res > 0:
            first_res = res
        z_prev, z = z, z_new
        done = res / scale <= options.tol
        if first_res is not None and res > options.divergence_factor * first_res:
            records.append(_record(problem, k, z, res, diff, t0))
            raise DivergenceError(
                f"residual {res:.3e} at iteration {k} exceeds {options.divergence_factor:g}x "
                f"the initial residual {first_res:.3e}; the step condition is probably violated",
                records,
            )
        if done:
            reason = "converged"
        if done or k % options.record_every == 0 or k == options.max_iter:
            records.append(_record(problem, k, z, res, diff, t0))
        if done:
            break
    return SolveResult(z.x.copy(), records, reason, k, z, res, metric, schedule)


def _residual(metric, K, d, copies):
    """``||d||_P``, or ``None`` when ``<d, P d>`` is clearly negative."""
    q = precond.metric_inner(metric, K, d, d, copies)
    if q < 0:
        diag = copies * (np.sum(d.x**2 / metric.sigma) + np.sum(d.y**2 / metric.gamma))
        diag += np.sum(d.v**2 / metric.tau)
        if q < -1e-12 * diag:
            return None
        q = 0.0
    return math.sqrt(q)


def _record(problem, k, z, res, diff, t0):
    return ConvergenceRecord(
        iter=k,
        objective=float(problem.objective(z.x)),
        km_residual_P=float(res),
        primal_change=float(np.linalg.norm(diff.x)),
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )

"""Step metrics: scalar step triples and diagonal preconditioners.

A metric holds the primal step ``sigma``, the step ``gamma`` of the dual
variable attached to G, and the step ``tau`` of the dual variable attached
to F o K.  In scalar mode these are floats; in diagonal mode they are
positive vectors (over the primal, primal and stacked dual dimensions
respectively).  Both modes induce the block metric

    P = [[1/sigma, -I, -K*], [-I, 1/gamma, 0], [-K, 0, 1/tau]]

which must be positive definite for the iteration to converge.
"""
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .linop import NORM_SAFETY, Dense, LinearMap, StackedMap, estimate_norm

__all__ = [
    "InvalidMetricError",
    "StepMetric",
    "ValidationReport",
    "validate_scalar",
    "validate_split",
    "build_diagonal",
    "validate_diagonal",
    "check_metric",
    "metric_inner",
    "metric_norm",
    "auto_scalar_steps",
    "DIAGONAL_SHRINK",
]

#: factor applied to the raw row/column-sum preconditioner so that the
#: non-strict bound it satisfies becomes strict
DIAGONAL_SHRINK = 1.0 - 1e-3


class InvalidMetricError(ValueError):
    pass


@dataclass(frozen=True)
class StepMetric:
    mode: str
    sigma: object
    gamma: object
    tau: object
    validated: bool = False
    report: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("scalar", "diagonal"):
            raise ValueError(f"unknown metric mode {self.mode!r}")
        for name in ("sigma", "gamma", "tau"):
            val = getattr(self, name)
            if self.mode == "scalar":
                val = float(val)
            else:
                val = np.array(val, dtype=float).ravel()
                val.setflags(write=False)
            if not np.all(np.isfinite(val)) or np.any(np.asarray(val) <= 0):
                raise ValueError(f"{name} must be positive and finite")
            object.__setattr__(self, name, val)

    @classmethod
    def scalar(cls, sigma, gamma, tau):
        return cls("scalar", sigma, gamma, tau)

    @classmethod
    def diagonal(cls, sigma, gamma, tau):
        return cls("diagonal", sigma, gamma, tau)

    def tau_block(self, s):
        """Dual step restricted to the dual slice ``s``."""
        return self.tau if self.mode == "scalar" else self.tau[s]


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    margin: float
    terms: dict
    message: str = ""

    def __bool__(self):
        return self.accepted


def _scalar_report(sigma, gamma, tau, sq_norm_sum, label):
    positive = sigma > 0 and gamma > 0 and tau > 0
    value = sigma * gamma + sigma * tau * sq_norm_sum
    margin = 1.0 - value
    accepted = bool(positive and margin > 0)
    if not positive:
        msg = "steps must be strictly positive"
    elif accepted:
        msg = f"{label}: {value:.6g} < 1"
    else:
        msg = f"{label}: {value:.6g} >= 1"
    return ValidationReport(
        accepted,
        margin,
        {"sigma_gamma": sigma * gamma, "sigma_tau_normsq": sigma * tau * sq_norm_sum},
        msg,
    )


def validate_scalar(sigma, gamma, tau, norm_K):
    """Accept iff all steps are positive and ``sigma*gamma + sigma*tau*||K||^2 < 1``."""
    return _scalar_report(sigma, gamma, tau, norm_K**2, "sigma*gamma + sigma*tau*||K||^2")


def validate_split(sigma, gamma, tau, norms):
    """Split variant: ``sigma*gamma + sigma*tau*sum_i ||K_i||^2 < 1``."""
    sq = float(sum(n**2 for n in norms))
    return _scalar_report(sigma, gamma, tau, sq, "sigma*gamma + sigma*tau*sum ||K_i||^2")


def _as_map(K):
    if isinstance(K, LinearMap):
        return K
    if isinstance(K, (list, tuple)) and K and all(isinstance(k, LinearMap) for k in K):
        return StackedMap(K)
    return Dense(np.atleast_2d(np.asarray(K, dtype=float)))


def build_diagonal(K, s=1.0, shrink=DIAGONAL_SHRINK, zero_rows="reject", pairs=None):
    """Row/column power-sum preconditioner of ``D = [I; K]``.

    ``sigma_j = 1 / sum_i |D_ij|^(2-s)`` over columns and
    ``phi_i = 1 / sum_j |D_ij|^s`` over rows, with ``|0|^0 = 0``.  The first
    ``n`` entries of ``phi`` are ``gamma``, the rest ``tau``.  All three are
    multiplied by ``shrink``.

    ``K`` may be a matrix, a :class:`LinearMap`, or a list of maps which is
    stacked row-wise.  The sums come from ``abs_apply``/``abs_adjoint``, so
    structured operators are never expanded to dense form.

    A zero row of ``K`` makes its ``phi`` infinite.  With
    ``zero_rows="reject"`` that raises; with ``zero_rows="unit"`` the row
    gets ``phi = 1``, which is harmless because the row does not couple to
    the primal variable (boundary rows of forward differences, for example).

    ``pairs`` is an optional ``(a, b)`` pair of index arrays into the dual
    rows; each ``tau[a[k]]`` and ``tau[b[k]]`` is replaced by their minimum
    so that non-separable pair functions (isotropic TV) see one step per
    pair.  Lowering steps never breaks the bound.
    """
    if zero_rows not in ("reject", "unit"):
        raise ValueError(f"zero_rows must be 'reject' or 'unit', got {zero_rows!r}")
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"exponent s must lie in [0, 2], got {s}")
    Kop = _as_map(K)
    n = Kop.in_dim
    # the identity block contributes exactly one unit entry per column and per row
    col = 1.0 + Kop.abs_adjoint(np.ones(Kop.out_dim), 2.0 - s)
    row = Kop.abs_apply(np.ones(n), s)
    bad = np.flatnonzero(row == 0)
    if bad.size:
        if zero_rows == "reject":
            raise ValueError(f"row {n + int(bad[0])} of [I; K] is zero (K row {int(bad[0])})")
        row[bad] = 1.0
    sigma = shrink / col
    gamma = np.full(n, shrink)
    tau = shrink / row
    if pairs is not None:
        a, b = (np.asarray(i) for i in pairs)
        low = np.minimum(tau[a], tau[b])
        tau[a] = low
        tau[b] = low
    return StepMetric.diagonal(sigma, gamma, tau)


#: above this primal dimension validate_diagonal switches from a dense
#: eigen-solve to a matrix-free upper bound
DENSE_VALIDATION_LIMIT = 1500


def _collatz_wielandt(apply_B, w, max_iter=500):
    """Smallest ``max_i (B w)_i / w_i`` seen along a power iteration.

    For an entrywise nonnegative ``B`` and any positive ``w`` this ratio
    bounds the spectral radius from above, so every value is a valid bound.
    """
    best = np.inf
    for _ in range(max_iter):
        Bw = apply_B(w)
        best = min(best, float(np.max(Bw / w)))
        if best * (1.0 + 1e-12) < 1.0 or not np.all(Bw > 0):
            break
        w = Bw / np.max(Bw)
    return best


def validate_diagonal(metric, K):
    """Check positive definiteness of the diagonal-metric ``P``.

    ``P`` is positive definite iff ``||S^(1/2) [U^(1/2), K* T^(1/2)]||^2 < 1``.
    The report also carries the two separate terms ``||S^(1/2) U^(1/2)||^2``
    and ``||S^(1/2) K* T^(1/2)||^2`` and their sum (a sufficient but
    stronger condition), under the keys ``upsilon_term``, ``k_term``,
    ``sum`` and ``combined``.

    Up to ``DENSE_VALIDATION_LIMIT`` primal dimensions the squared norms are
    exact dense eigenvalues.  Beyond it they are replaced by rigorous upper
    bounds: the spectral radius of the entrywise absolute operator,
    bounded through Collatz-Wielandt ratios.
    """
    Kop = _as_map(K)
    n, p = Kop.in_dim, Kop.out_dim
    sig = np.broadcast_to(np.asarray(metric.sigma, dtype=float), (n,))
    ups = np.broadcast_to(np.asarray(metric.gamma, dtype=float), (n,))
    tau = np.broadcast_to(np.asarray(metric.tau, dtype=float), (p,))
    if np.any(sig <= 0) or np.any(ups <= 0) or np.any(tau <= 0):
        return ValidationReport(False, -np.inf, {}, "steps must be strictly positive")
    rs = np.sqrt(sig)
    up_term = float(np.max(sig * ups))
    if n <= DENSE_VALIDATION_LIMIT:
        M = rs[:, None] * Kop.as_matrix().T * np.sqrt(tau)[None, :]
        # dense symmetric eigen-solves; eigvalsh is accurate to a few ulps
        k_term = float(np.linalg.eigvalsh(M @ M.T)[-1])
        combined = float(np.linalg.eigvalsh(np.diag(sig * ups) + M @ M.T)[-1])
        label = ""
    else:
        def k_part(w):
            return rs * Kop.abs_adjoint(tau * Kop.abs_apply(rs * w))

        w0 = 1.0 / rs
        k_term = _collatz_wielandt(k_part, w0)
        combined = _collatz_wielandt(lambda w: sig * ups * w + k_part(w), w0)
        label = " (upper bound)"
    combined *= 1.0 + 1e-12
    margin = 1.0 - combined
    accepted = margin > 0
    terms = {
        "upsilon_term": up_term,
        "k_term": k_term,
        "sum": up_term + k_term,
        "combined": combined,
    }
    msg = f"||S^1/2 [U^1/2, K* T^1/2]||^2{label} = {combined:.6g} " + ("< 1" if accepted else ">= 1")
    return ValidationReport(bool(accepted), margin, terms, msg)


def _block_norms(Ks):
    return [NORM_SAFETY * estimate_norm(k) for k in Ks]


def check_metric(metric, Ks):
    """Validate ``metric`` against the operator blocks ``Ks``.

    Returns a copy flagged as validated, or raises
    :class:`InvalidMetricError`.  Scalar metrics use power-iteration norms
    inflated by ``NORM_SAFETY``.
    """
    if isinstance(Ks, LinearMap):
        Ks = list(Ks.blocks) if isinstance(Ks, StackedMap) else [Ks]
    if metric.mode == "scalar":
        rep = validate_split(metric.sigma, metric.gamma, metric.tau, _block_norms(Ks))
    else:
        rep = validate_diagonal(metric, list(Ks))
    if not rep.accepted:
        raise InvalidMetricError(f"step metric rejected: {rep.message}")
    return dataclasses.replace(metric, validated=True, report=rep)


def auto_scalar_steps(norms, target=0.95):
    """Largest ``s`` with ``s^2 * (1 + sum ||K_i||^2) = target`` (norms inflated)."""
    sq = sum((NORM_SAFETY * n) ** 2 for n in norms)
    s = float(np.sqrt(target / (1.0 + sq)))
    return StepMetric.scalar(s, s, s)


def _dual_op(K):
    if isinstance(K, (list, tuple)):
        return StackedMap(K)
    if isinstance(K, LinearMap):
        return K
    return Dense(K)


def metric_inner(metric, K, z, zp, copies=1):
    """``<z, P zp>`` for triples ``z = (x, y, v)``.

    ``copies`` counts the replicated primal/G-dual blocks of the split
    formulation; the x and y terms are weighted by it.
    """
    K = _dual_op(K)
    x, y, v = z
    xp, yp, vp = zp
    px = xp / metric.sigma - yp - K.adjoint(vp)
    py = -xp + yp / metric.gamma
    pv = -K.apply(xp) + vp / metric.tau
    if copies == 1:
        return float(x @ px + y @ py + v @ pv)
    # x-y part scales with the copies; the coupling through K does not
    kx = K.adjoint(vp)
    return float(copies * (x @ (px + kx) + y @ py) - x @ kx + v @ pv)


def metric_norm(metric, K, z, copies=1):
    """``sqrt(<z, P z>)``; the metric must have been validated."""
    if not metric.validated:
        raise InvalidMetricError("metric_norm needs a validated metric (see check_metric)")
    q = metric_inner(metric, K, z, z, copies)
    return float(np.sqrt(max(q, 0.0)))

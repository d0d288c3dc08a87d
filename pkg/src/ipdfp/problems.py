"""Problem builders: L1/TV denoising, sparse logistic regression, l1 least squares."""
from dataclasses import dataclass

import numpy as np

from .linop import Dense, LinearMap, first_difference_2d, identity
from .prox import Box, GroupL2, L1Norm, Logistic, ProxFunction, SquaredL2, Zero
from .solver import CONSENSUS

__all__ = [
    "CompositeProblem",
    "LogRegDataset",
    "build_l1tv",
    "build_logreg",
    "build_l1_least_squares",
    "objective",
    "logreg_objective",
    "logistic_toy",
    "l1ls_toy",
    "impulse_noise_image",
]


@dataclass(frozen=True)
class CompositeProblem:
    """``sum_i F_i(K_i x) + G(x) + H(x)``.

    ``H`` is ``None`` (absent), a :class:`ProxFunction`, or
    :data:`~ipdfp.solver.CONSENSUS` for split problems, where it carries no
    value on the consensus variable.
    """

    primal_dim: int
    blocks: tuple
    G: object = None
    H: object = None
    name: str = "composite"

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple((K, F) for K, F in self.blocks))
        for i, (K, F) in enumerate(self.blocks):
            if not isinstance(K, LinearMap):
                raise TypeError(f"block {i}: operator must be a LinearMap")
            if K.in_dim != self.primal_dim:
                raise ValueError(f"block {i}: K has in_dim {K.in_dim}, primal_dim is {self.primal_dim}")
            if F.dim is not None and F.dim != K.out_dim:
                raise ValueError(f"block {i}: F has dim {F.dim}, K has out_dim {K.out_dim}")

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.primal_dim,):
            raise ValueError(f"expected length {self.primal_dim}, got {x.shape}")
        val = sum(F(K.apply(x)) for K, F in self.blocks)
        if self.G is not None:
            val += self.G(x)
        if isinstance(self.H, ProxFunction):
            val += self.H(x)
        return float(val)

    @property
    def operators(self):
        return [K for K, _ in self.blocks]


def objective(problem, x):
    return problem.objective(x)


@dataclass(frozen=True)
class LogRegDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        A = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] == 0:
            raise ValueError("features must be a non-empty 2-D array")
        if y.shape[0] != A.shape[0]:
            raise ValueError(f"{A.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", A)
        object.__setattr__(self, "labels", y)

    @property
    def m(self):
        return self.features.shape[0]

    @property
    def q(self):
        return self.features.shape[1]


def build_l1tv(b, lambda_tv, isotropic=False, shape=None, box=(0.0, 255.0), box_atol=1e-6):
    """``||x - b||_1 + lambda_tv * TV(x) + indicator_box(x)`` as a split problem.

    ``b`` is a 2-D image or a flat row-major vector with ``shape=(h, w)``.
    Blocks: (identity, box indicator) and (forward differences, TV atom).
    """
    if lambda_tv <= 0:
        raise ValueError("lambda_tv must be positive")
    b = np.asarray(b, dtype=float)
    if b.ndim == 2:
        h, w = b.shape
    elif shape is not None:
        h, w = shape
    else:
        raise ValueError("a flat image needs shape=(h, w)")
    b = b.ravel()
    if b.size != h * w:
        raise ValueError(f"image has {b.size} pixels, shape says {h}x{w}")
    n = h * w
    B = first_difference_2d(h, w)
    tv = GroupL2(lambda_tv, layout="split") if isotropic else L1Norm(lambda_tv)
    blocks = [(identity(n), Box(box[0], box[1], dim=n, atol=box_atol)), (B, tv)]
    return CompositeProblem(n, blocks, G=L1Norm(shift=b), H=CONSENSUS, name="l1tv")


def _partition(m, N):
    if not 1 <= N <= m:
        raise ValueError(f"batch count must lie in [1, {m}], got {N}")
    return np.array_split(np.arange(m), N)


def build_logreg(data, tau, N=1):
    """Sparse logistic regression split over ``N`` contiguous batches.

    Batch ``n`` contributes ``F_n(z) = sum_{i in W_n} (1/m) log(1 + exp(-y_i z_i))``
    with ``K_n`` the batch rows of the feature matrix; ``G = tau ||x||_1``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    A, y = data.features, data.labels
    m = data.m
    blocks = [(Dense(A[idx]), Logistic(y[idx], 1.0 / m)) for idx in _partition(m, N)]
    return CompositeProblem(data.q, blocks, G=L1Norm(tau), H=CONSENSUS, name="logreg")


def logreg_objective(data, tau, x):
    """Direct evaluation of the mean logistic loss plus ``tau ||x||_1``."""
    z = data.labels * (data.features @ x)
    return float(np.mean(np.log1p(np.exp(-z))) + tau * np.abs(x).sum())


def build_l1_least_squares(b, tau):
    """``0.5 ||x - b||^2 + tau ||x||_1`` with the quadratic as ``H`` and ``K = I``."""
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    return CompositeProblem(
        n, [(identity(n), L1Norm(tau))], G=Zero(), H=SquaredL2(shift=b), name="l1ls"
    )


def l1ls_toy():
    """5-dim instance with a closed-form solution ``soft(b, tau)``."""
    b = np.array([3.0, -0.2, 1.5, -2.5, 0.4])
    return build_l1_least_squares(b, 0.5), b, 0.5


def logistic_toy():
    """4 samples, 2 features, overlapping classes, ``tau = 1e-6``."""
    A = np.array([[2.0, 0.0], [0.0, 3.0], [2.0, 1.0], [1.0, 2.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    return LogRegDataset(A, y), 1e-6


def impulse_noise_image(h=16, w=16, density=0.2, seed=0):
    """Piecewise-constant test image and a salt-and-pepper corrupted copy."""
    rng = np.random.default_rng(seed)
    clean = np.full((h, w), 60.0)
    clean[h // 4 : 3 * h // 4, w // 4 : 3 * w // 4] = 190.0
    clean[: h // 3, 2 * w // 3 :] = 120.0
    noisy = clean.copy()
    mask = rng.random((h, w)) < density
    noisy[mask] = np.where(rng.random(mask.sum()) < 0.5, 0.0, 255.0)
    return clean, noisy

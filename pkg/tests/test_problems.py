import numpy as np
import pytest

from ipdfp.linop import identity
from ipdfp.oracle import GridSpec, prox_oracle
from ipdfp.problems import (
    CompositeProblem,
    LogRegDataset,
    build_l1_least_squares,
    build_l1tv,
    build_logreg,
    impulse_noise_image,
    logistic_toy,
    logreg_objective,
)
from ipdfp.prox import Zero


def tv(img):
    return np.abs(np.diff(img, axis=1)).sum() + np.abs(np.diff(img, axis=0)).sum()


def test_l1tv_constant_image_is_optimal_with_zero_objective():
    b = np.full((3, 4), 17.0)
    p = build_l1tv(b, 2.0)
    assert p.objective(b.ravel()) == 0.0


def test_l1tv_two_pixel_constant_candidates():
    p = build_l1tv(np.array([[0.0, 255.0]]), 1e6)
    for c in (0.0, 100.0, 255.0):
        assert p.objective(np.array([c, c])) == 255.0
    # a grid over c confirms that no constant does better
    best = prox_oracle(
        lambda Y: np.array([p.objective(np.array([y, y])) for y in Y[:, 0]]) - 0.5 * (Y[:, 0] ** 2),
        1.0,
        [0.0],
        GridSpec(-10, 265, 0.5),
    )
    assert p.objective(np.array([best[0], best[0]])) == 255.0


def test_l1tv_objective_at_b_is_weighted_tv(rng):
    b = rng.integers(0, 256, size=(5, 6)).astype(float)
    p = build_l1tv(b, 3.5)
    assert p.objective(b.ravel()) == pytest.approx(3.5 * tv(b))


def test_l1tv_isotropic_objective(rng):
    b = rng.integers(0, 256, size=(4, 4)).astype(float)
    p = build_l1tv(b, 1.0, isotropic=True)
    dx = np.zeros((4, 4))
    dy = np.zeros((4, 4))
    dx[:, :-1] = np.diff(b, axis=1)
    dy[:-1, :] = np.diff(b, axis=0)
    assert p.objective(b.ravel()) == pytest.approx(np.hypot(dx, dy).sum())


def test_l1tv_box_violation_is_infinite():
    p = build_l1tv(np.zeros((1, 2)), 1.0)
    assert p.objective(np.array([-1.0, 0.0])) == np.inf


def test_l1tv_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_l1tv(np.zeros((2, 2)), 0.0)
    with pytest.raises(ValueError):
        build_l1tv(np.zeros(4), 1.0)
    with pytest.raises(ValueError):
        build_l1tv(np.zeros(5), 1.0, shape=(2, 2))


def test_logreg_objective_at_zero_is_log2():
    data, tau = logistic_toy()
    p = build_logreg(data, tau)
    assert p.objective(np.zeros(2)) == pytest.approx(np.log(2), abs=1e-15)
    assert round(p.objective(np.zeros(2)), 6) == 0.693147


def test_logreg_partitions_share_objective(rng):
    A = rng.normal(size=(7, 3))
    y = np.where(rng.random(7) < 0.5, -1.0, 1.0)
    data = LogRegDataset(A, y)
    p1 = build_logreg(data, 0.1, N=1)
    pm = build_logreg(data, 0.1, N=7)
    p3 = build_logreg(data, 0.1, N=3)
    assert [K.out_dim for K in p3.operators] == [3, 2, 2]
    for _ in range(20):
        x = rng.normal(size=3)
        v = logreg_objective(data, 0.1, x)
        assert p1.objective(x) == pytest.approx(v, abs=1e-12)
        assert pm.objective(x) == pytest.approx(v, abs=1e-12)
        assert p3.objective(x) == pytest.approx(v, abs=1e-12)


def test_logreg_objective_direct_evaluation(rng):
    data, tau = logistic_toy()
    p = build_logreg(data, tau)
    for _ in range(10):
        x = rng.normal(size=2)
        direct = sum(
            np.log(1 + np.exp(-yi * (ai @ x))) for ai, yi in zip(data.features, data.labels)
        ) / 4 + tau * np.abs(x).sum()
        assert p.objective(x) == pytest.approx(direct, abs=1e-12)


def test_logreg_rejects_bad_inputs():
    with pytest.raises(ValueError):
        LogRegDataset(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        LogRegDataset(np.zeros((2, 2)), [1, 0])
    data, _ = logistic_toy()
    with pytest.raises(ValueError):
        build_logreg(data, 0.1, N=5)
    with pytest.raises(ValueError):
        build_logreg(data, 0.0)


@pytest.mark.parametrize(
    "builder",
    [
        lambda rng: build_l1tv(rng.uniform(0, 255, size=(3, 3)), 2.0),
        lambda rng: build_logreg(logistic_toy()[0], 0.05, N=2),
        lambda rng: build_l1_least_squares(rng.normal(size=4), 0.3),
    ],
)
def test_objective_is_midpoint_convex(builder, rng):
    p = builder(rng)
    for _ in range(100):
        u = rng.uniform(1, 250, size=p.primal_dim) if p.name == "l1tv" else rng.normal(size=p.primal_dim)
        w = rng.uniform(1, 250, size=p.primal_dim) if p.name == "l1tv" else rng.normal(size=p.primal_dim)
        assert p.objective((u + w) / 2) <= (p.objective(u) + p.objective(w)) / 2 + 1e-10


def test_zero_problem_objective():
    p = CompositeProblem(2, [(identity(2), Zero())], G=Zero())
    assert p.objective(np.array([5.0, -1.0])) == 0.0


def test_composite_problem_checks_dimensions():
    from ipdfp.prox import L1Norm

    with pytest.raises(ValueError):
        CompositeProblem(3, [(identity(2), Zero())])
    with pytest.raises(ValueError):
        CompositeProblem(2, [(identity(2), L1Norm(shift=[1.0, 2.0, 3.0]))])
    with pytest.raises(ValueError):
        build_l1_least_squares(np.ones(2), 0.1).objective(np.ones(3))


def test_impulse_noise_image_is_deterministic():
    c1, n1 = impulse_noise_image(16, 16, 0.2, 0)
    c2, n2 = impulse_noise_image(16, 16, 0.2, 0)
    np.testing.assert_array_equal(n1, n2)
    changed = n1 != c1
    assert 0.1 < changed.mean() < 0.3
    assert set(np.unique(n1[changed])) <= {0.0, 255.0}

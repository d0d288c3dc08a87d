import os
import subprocess
import sys

import numpy as np
import pytest

from ipdfp import kernels

needs_ext = pytest.mark.skipif("ext" not in kernels.available_backends(), reason="extension not built")


@pytest.fixture
def both():
    return kernels.get_backend("python"), kernels.get_backend("ext")


@needs_ext
@pytest.mark.parametrize("n", [1, 7, 300])
def test_elementwise_kernels_agree(both, rng, n):
    py, ext = both
    u = rng.normal(scale=3, size=n)
    thr = rng.random(n)
    np.testing.assert_allclose(ext.soft_threshold(u, thr), py.soft_threshold(u, thr), rtol=0, atol=1e-14)
    np.testing.assert_allclose(ext.soft_threshold(u, 0.5), py.soft_threshold(u, 0.5), rtol=0, atol=1e-14)
    a, b = rng.normal(size=n), rng.normal(size=n)
    for e, p in zip(ext.group_shrink(a, b, thr), py.group_shrink(a, b, thr)):
        np.testing.assert_allclose(e, p, rtol=0, atol=1e-14)
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    lam = 0.1 + rng.random(n)
    (te, ne), (tp, npy) = ext.logistic_prox(u, lam, y, 0.3), py.logistic_prox(u, lam, y, 0.3)
    np.testing.assert_allclose(te, tp, rtol=0, atol=1e-12)
    assert ne == npy == 0


@needs_ext
def test_logistic_prox_exact_root_and_extremes(both):
    py, ext = both
    # u = 0, lam = 0: the prox is the identity, so the Newton start is already a root
    u = np.array([0.0, 40.0, -40.0, 1e-300])
    for args in [(u, 0.0, 1.0, 1.0), (u, 1e6, -1.0, 2.0), (u, 1e-8, 1.0, 1e-3)]:
        np.testing.assert_allclose(ext.logistic_prox(*args)[0], py.logistic_prox(*args)[0], rtol=1e-12, atol=1e-12)


@needs_ext
@pytest.mark.parametrize("h,w", [(1, 1), (1, 5), (4, 1), (6, 9)])
def test_difference_kernels_agree(both, rng, h, w):
    py, ext = both
    x = rng.normal(size=h * w)
    g = rng.normal(size=2 * h * w)
    np.testing.assert_array_equal(ext.diff2d(x, h, w), py.diff2d(x, h, w))
    np.testing.assert_allclose(ext.diff2d_adjoint(g, h, w), py.diff2d_adjoint(g, h, w), rtol=0, atol=1e-14)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="not available"):
        kernels.get_backend("fortran")


def test_env_forces_python_backend():
    env = dict(os.environ, IPDFP_KERNELS="python")
    out = subprocess.run(
        [sys.executable, "-c", "from ipdfp import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
def test_solver_identical_under_both_backends():
    code = (
        "from ipdfp import precond\n"
        "from ipdfp.problems import build_l1tv, impulse_noise_image\n"
        "from ipdfp.solver import SolveOptions, run, suggest_schedule\n"
        "_, noisy = impulse_noise_image(8, 8, 0.2, 1)\n"
        "p = build_l1tv(noisy, 2.0)\n"
        "m = precond.build_diagonal(p.operators, s=1.0, zero_rows='unit')\n"
        "r = run(p, m, suggest_schedule(0.1), SolveOptions(max_iter=300, tol=1e-300))\n"
        "print(repr(r.records[-1].objective))\n"
    )
    vals = []
    for name in ("python", "ext"):
        env = dict(os.environ, IPDFP_KERNELS=name)
        vals.append(float(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout))
    assert abs(vals[0] - vals[1]) <= 1e-9 * max(1.0, abs(vals[0]))

import numpy as np
import pytest

from ipdfp.linop import (
    Dense,
    Diagonal,
    DimensionError,
    StackedMap,
    adjoint_apply,
    apply,
    estimate_norm,
    first_difference_1d,
    first_difference_2d,
    identity,
    load_matrix_csv,
)


def all_operators():
    rng = np.random.default_rng(7)
    return [
        identity(5),
        Diagonal([3.0, 1.0, -2.0]),
        Dense(rng.normal(size=(4, 6))),
        first_difference_1d(7),
        first_difference_2d(4, 5),
        first_difference_2d(1, 3),
        StackedMap([identity(6), Dense(rng.normal(size=(2, 6))), first_difference_2d(2, 3)]),
    ]


def test_apply_examples():
    np.testing.assert_array_equal(apply(identity(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_array_equal(apply(Diagonal([3, 1]), [1, 1]), [3, 1])
    np.testing.assert_array_equal(apply(Dense([[1, 2], [3, 4]]), [1, 0]), [1, 3])


def test_dense_apply_matches_row_by_row_product(rng):
    A = rng.normal(size=(5, 3))
    u = rng.normal(size=3)
    by_rows = [sum(A[i, j] * u[j] for j in range(3)) for i in range(5)]
    np.testing.assert_allclose(Dense(A).apply(u), by_rows, rtol=1e-14)


def test_adjoint_examples():
    np.testing.assert_array_equal(adjoint_apply(identity(2), [5, 6]), [5, 6])
    np.testing.assert_array_equal(adjoint_apply(Dense([[1, 2], [3, 4]]), [1, 0]), [1, 2])
    np.testing.assert_array_equal(adjoint_apply(first_difference_1d(3), [1, 0]), [-1, 1, 0])


@pytest.mark.parametrize("K", all_operators(), ids=repr)
def test_adjoint_consistency(K, rng):
    for _ in range(100):
        u = rng.normal(size=K.in_dim)
        w = rng.normal(size=K.out_dim)
        lhs = K.apply(u) @ w
        rhs = u @ K.adjoint(w)
        assert abs(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(u) * np.linalg.norm(w))


@pytest.mark.parametrize("K", all_operators(), ids=repr)
def test_linearity(K, rng):
    u, w = rng.normal(size=(2, K.in_dim))
    a = rng.normal()
    np.testing.assert_allclose(K.apply(u + a * w), K.apply(u) + a * K.apply(w), atol=1e-12)


@pytest.mark.parametrize("K", all_operators(), ids=repr)
def test_norm_is_upper_envelope(K, rng):
    nrm = estimate_norm(K)
    for _ in range(20):
        u = rng.normal(size=K.in_dim)
        assert nrm >= np.linalg.norm(K.apply(u)) / np.linalg.norm(u) - 1e-8 * nrm


def test_dimension_mismatch_reports_both_sizes():
    with pytest.raises(DimensionError, match="3.*\\(2,\\)"):
        identity(3).apply([1.0, 2.0])
    with pytest.raises(DimensionError):
        Dense([[1, 2], [3, 4]]).adjoint([1.0, 2.0, 3.0])


def test_norm_examples():
    assert estimate_norm(identity(4)) == pytest.approx(1.0, rel=1e-8)
    assert estimate_norm(Diagonal([3, 1])) == pytest.approx(3.0, rel=1e-8)
    est = estimate_norm(Dense([[1, 2], [3, 4]]))
    assert round(est, 4) == 5.4650
    # independent eigen-solve of K^T K
    ev = np.linalg.eigvalsh(np.array([[10.0, 14.0], [14.0, 20.0]]))[-1]
    assert est == pytest.approx(np.sqrt(ev), rel=1e-8)
    assert ev == pytest.approx(29.866, abs=1e-3)


def test_norm_is_deterministic():
    K = Dense(np.random.default_rng(3).normal(size=(6, 6)))
    assert estimate_norm(K) == estimate_norm(K)


def test_difference_2d_examples():
    K = first_difference_2d(1, 2)
    a, b = 3.0, 10.0
    np.testing.assert_array_equal(K.apply([a, b]), [b - a, 0, 0, 0])
    np.testing.assert_array_equal(first_difference_2d(3, 4).apply(np.full(12, 2.5)), np.zeros(24))
    assert first_difference_2d(3, 4).out_dim == 24


def test_difference_2d_norm_bound():
    assert estimate_norm(first_difference_2d(8, 8)) ** 2 <= 8.0


def test_difference_2d_matches_explicit_loops(rng):
    h, w = 3, 4
    x = rng.normal(size=h * w)
    img = x.reshape(h, w)
    horiz = np.zeros((h, w))
    vert = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            if j + 1 < w:
                horiz[i, j] = img[i, j + 1] - img[i, j]
            if i + 1 < h:
                vert[i, j] = img[i + 1, j] - img[i, j]
    np.testing.assert_allclose(
        first_difference_2d(h, w).apply(x), np.concatenate([horiz.ravel(), vert.ravel()])
    )


def test_stacked_apply_slices_per_block(rng):
    blocks = [identity(4), Dense(rng.normal(size=(3, 4))), first_difference_1d(4)]
    S = StackedMap(blocks)
    u = rng.normal(size=4)
    out = S.apply(u)
    assert S.out_dim == 4 + 3 + 3
    for K, part in zip(blocks, S.split(out)):
        np.testing.assert_array_equal(part, K.apply(u))


def test_stacked_rejects_mismatched_inputs():
    with pytest.raises(DimensionError):
        StackedMap([identity(3), identity(4)])


def test_load_matrix_csv(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("1,2\n3.5,-4e-1\n")
    np.testing.assert_array_equal(load_matrix_csv(p).as_matrix(), [[1, 2], [3.5, -0.4]])
    p.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="ragged"):
        load_matrix_csv(p)
    p.write_text("1,x\n")
    with pytest.raises(ValueError, match=":1:"):
        load_matrix_csv(p)


@pytest.mark.parametrize("K", all_operators(), ids=repr)
@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 2.0])
def test_abs_power_products_match_dense(K, p, rng):
    A = np.abs(K.as_matrix())
    Ap = np.where(A > 0, A**p, 0.0)
    u = rng.normal(size=K.in_dim)
    w = rng.normal(size=K.out_dim)
    np.testing.assert_allclose(K.abs_apply(u, p), Ap @ u, atol=1e-12)
    np.testing.assert_allclose(K.abs_adjoint(w, p), Ap.T @ w, atol=1e-12)

import numpy as np
import pytest

from fbsplit.linop import (
    LinearOperator,
    adjoint_consistency,
    as_shape,
    from_matrix,
    gradient_operator,
    identity,
    load_dense_matrix,
)


def brute_force_matvec(a, x):
    """Independent oracle: explicit double loop."""
    m, n = a.shape
    out = np.zeros(m)
    for i in range(m):
        for j in range(n):
            out[i] += a[i, j] * x[j]
    return out


def brute_force_rmatvec(a, y):
    m, n = a.shape
    out = np.zeros(n)
    for j in range(n):
        for i in range(m):
            out[j] += a[i, j] * y[i]
    return out


class TestShape:
    def test_int_promotes_to_tuple(self):
        assert as_shape(4) == (4,)

    def test_rejects_zero_extent(self):
        with pytest.raises(ValueError):
            as_shape((3, 0))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_shape(())


class TestApply:
    def test_identity(self):
        op = identity(3)
        np.testing.assert_array_equal(op.apply(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])

    def test_dense_hand_product(self):
        op = from_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(op.apply(np.array([1.0, 1.0])), [3.0, 7.0])

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((5, 10))
        x = rng.standard_normal(10)
        got = from_matrix(a).apply(x)
        want = brute_force_matvec(a, x)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_shape_mismatch_names_shapes(self):
        op = from_matrix(np.eye(3))
        with pytest.raises(ValueError, match=r"\(3,\).*\(2,\)"):
            op.apply(np.zeros(2))

    def test_pure_and_repeatable(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        op = from_matrix(a)
        x = rng.standard_normal(4)
        first = op.apply(x)
        second = op.apply(x)
        assert np.array_equal(first, second)
        np.testing.assert_array_equal(x, x)  # input untouched


class TestAdjointApply:
    def test_dense_transpose_row(self):
        op = from_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(op.adjoint_apply(np.array([1.0, 0.0])), [1.0, 2.0])

    def test_identity_unchanged(self):
        op = identity((2, 2))
        y = np.arange(4.0).reshape(2, 2)
        np.testing.assert_array_equal(op.adjoint_apply(y), y)

    def test_matches_transpose_loop_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 6))
        y = rng.standard_normal(4)
        got = from_matrix(a).adjoint_apply(y)
        np.testing.assert_allclose(got, brute_force_rmatvec(a, y), rtol=1e-12)


class TestAdjointConsistency:
    def test_true_transpose_passes(self):
        rng = np.random.default_rng(5)
        op = from_matrix(rng.standard_normal((7, 9)))
        assert adjoint_consistency(op, trials=100, seed=1) <= 1e-10

    def test_wrong_adjoint_fails(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((5, 8))
        wrong = rng.standard_normal((5, 8)).T
        op = from_matrix(a, adjoint_matrix=wrong)
        assert adjoint_consistency(op, trials=100, seed=1) > 1e-2

    def test_identity_is_exact(self):
        assert adjoint_consistency(identity(6), trials=10, seed=0) <= 1e-15

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            adjoint_consistency(identity(2), trials=0)


class TestGradientOperator:
    def test_1d_forward_differences(self):
        op = gradient_operator(3)
        g = op.apply(np.array([1.0, 2.0, 4.0]))
        np.testing.assert_array_equal(g[:, 0], [1.0, 2.0, 0.0])

    def test_constant_input_zero_gradient(self):
        op = gradient_operator((4, 5))
        g = op.apply(np.full((4, 5), 3.7))
        assert np.all(g == 0.0)

    def test_adjoint_consistency_3x3(self):
        op = gradient_operator((3, 3))
        assert adjoint_consistency(op, trials=100, seed=2) <= 1e-10

    def test_adjoint_consistency_rank3(self):
        op = gradient_operator((3, 4, 2))
        assert adjoint_consistency(op, trials=50, seed=3) <= 1e-10

    def test_inner_product_identity_directly(self):
        rng = np.random.default_rng(8)
        op = gradient_operator((5, 6))
        x = rng.standard_normal((5, 6))
        p = rng.standard_normal((5, 6, 2))
        lhs = np.vdot(op.apply(x), p)
        rhs = np.vdot(x, op.adjoint_apply(p))
        assert abs(lhs - rhs) <= 1e-10 * (abs(lhs) + abs(rhs) + 1)


class TestShippedOperatorsSuite:
    @pytest.mark.parametrize("make_op", [
        lambda: identity((3, 2)),
        lambda: from_matrix(np.random.default_rng(1).standard_normal((6, 11))),
        lambda: gradient_operator((4, 4)),
        lambda: gradient_operator(9),
    ])
    def test_100_trial_dot_product(self, make_op):
        assert adjoint_consistency(make_op(), trials=100, seed=7) <= 1e-10


class TestLoading:
    def test_csv_round_trip(self, tmp_path):
        a = np.array([[1.5, -2.0, 0.25], [0.0, 3.0, -1.0]])
        path = tmp_path / "a.csv"
        np.savetxt(path, a, delimiter=",", fmt="%.17g")
        np.testing.assert_array_equal(load_dense_matrix(path), a)

    def test_matrix_market_array(self, tmp_path):
        from scipy.io import mmwrite

        a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        path = tmp_path / "a.mtx"
        mmwrite(path, a)
        np.testing.assert_allclose(load_dense_matrix(path), a)

    def test_matrix_market_coordinate(self, tmp_path):
        from scipy.io import mmwrite
        from scipy.sparse import coo_matrix

        a = coo_matrix(np.array([[0.0, 2.0], [3.0, 0.0]]))
        path = tmp_path / "a.mtx"
        mmwrite(path, a)
        np.testing.assert_allclose(load_dense_matrix(path), a.toarray())


class TestRankChangingOperators:
    def test_matrix_to_vector_map(self):
        # operators may map between tensors of different rank
        rng = np.random.default_rng(4)
        w = rng.standard_normal((3, 3))
        op = LinearOperator(
            lambda x: np.array([np.sum(w * x)]),
            lambda y: y[0] * w,
            (3, 3),
            (1,),
        )
        assert adjoint_consistency(op, trials=20, seed=0) <= 1e-12

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mmd2_biased_loop, mmd2_unbiased_loop, variance_h1_loop
from mdmf import kernel_mmd
from mdmf.kernel_mmd import (deep_kernel, kernel_bundle, mmd2_biased, mmd2_unbiased,
                             objective_value_and_gradients, variance_h1)
from mdmf.pfs import PFSParams, init_params


def identity_scalar_params(log_gamma=0.0):
    """1 -> 1 network that passes its input through tanh(gelu-free) tanh chain."""
    return PFSParams(w1=np.array([[1.0]]), b1=np.zeros(1), w2=np.array([[1.0]]),
                     b2=np.zeros(1), log_gamma=log_gamma, dropout_rate=0.0,
                     activation="tanh")


class TestDeepKernel:
    def test_identical_fields_give_one(self, rng):
        z = rng.standard_normal((4, 2))
        assert deep_kernel(z, z, 0.7) == 1.0

    def test_unit_distance(self):
        value = deep_kernel(np.array([[0.0]]), np.array([[1.0]]), 1.0)
        assert value == pytest.approx(np.exp(-0.5), abs=1e-12)
        assert value == pytest.approx(0.606531, abs=1e-6)

    def test_three_four_five_distance(self):
        zx = np.array([[0.0], [0.0]])
        zy = np.array([[3.0], [4.0]])
        assert deep_kernel(zx, zy, 5.0) == pytest.approx(np.exp(-0.5), abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes"):
            deep_kernel(np.zeros((2, 1)), np.zeros((3, 1)), 1.0)

    def test_non_positive_bandwidth_rejected(self):
        with pytest.raises(ValueError, match="bandwidth"):
            deep_kernel(np.zeros((1, 1)), np.ones((1, 1)), 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 10.0))
    def test_kernel_range(self, seed, gamma):
        # bandwidth bounded away from 0 so exp() cannot underflow to 0.0
        r = np.random.default_rng(seed)
        zx, zy = r.standard_normal((2, 3, 2))
        value = deep_kernel(zx, zy, gamma)
        assert 0.0 < value <= 1.0
        assert deep_kernel(zx, zx, gamma) == 1.0


class TestMMDEstimators:
    def test_paired_identical_sets_cancel_exactly(self, rng):
        s = rng.standard_normal((6, 3, 2))
        assert mmd2_unbiased(s, s, 1.1) == 0.0

    def test_two_point_hand_expansion(self):
        sx = np.zeros((2, 1, 1))
        sy = np.full((2, 1, 1), 2.0)
        expected = 2.0 - 2.0 * np.exp(-2.0)
        assert mmd2_unbiased(sx, sy, 1.0) == pytest.approx(expected, abs=1e-12)
        assert mmd2_unbiased(sx, sy, 1.0) == pytest.approx(1.729329, abs=1e-6)

    def test_unbiasedness_under_null(self, rng):
        # mean over resamples within the 5-sigma CLT band around zero
        estimates = np.array([
            mmd2_unbiased(rng.standard_normal((16, 2)), rng.standard_normal((16, 2)), 1.0)
            for _ in range(1000)
        ])
        sem = estimates.std(ddof=1) / np.sqrt(len(estimates))
        assert abs(estimates.mean()) < 5.0 * sem

    def test_unbiased_matches_loop_oracle(self, rng):
        for _ in range(10):
            n, k, d = rng.integers(2, 7), rng.integers(1, 4), rng.integers(1, 4)
            sx = rng.standard_normal((n, k, d))
            sy = rng.standard_normal((n, k, d))
            gamma = float(rng.uniform(0.3, 3.0))
            assert mmd2_unbiased(sx, sy, gamma) == pytest.approx(
                mmd2_unbiased_loop(sx, sy, gamma), abs=1e-12)

    def test_small_batch_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            mmd2_unbiased(np.zeros((1, 1, 1)), np.zeros((1, 1, 1)), 1.0)

    def test_unequal_batches_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            mmd2_unbiased(np.zeros((2, 1, 1)), np.zeros((3, 1, 1)), 1.0)

    def test_biased_zero_on_identical_sets(self, rng):
        s = rng.standard_normal((4, 2, 2))
        assert mmd2_biased(s, s, 0.8) == 0.0

    def test_biased_two_point_formula(self):
        sx = np.array([[[0.0, 0.0]]])
        sy = np.array([[[3.0, 4.0]]])
        gamma = 2.0
        expected = 2.0 * (1.0 - np.exp(-25.0 / (2.0 * gamma**2)))
        assert mmd2_biased(sx, sy, gamma) == pytest.approx(expected, abs=1e-12)

    def test_biased_matches_loop_oracle(self, rng):
        sx = rng.standard_normal((7, 2, 3))
        sy = rng.standard_normal((7, 2, 3))
        assert mmd2_biased(sx, sy, 1.4) == pytest.approx(
            mmd2_biased_loop(sx, sy, 1.4), abs=1e-12)

    def test_biased_supports_unequal_sizes(self, rng):
        sx = rng.standard_normal((5, 2, 2))
        sy = rng.standard_normal((3, 2, 2))
        assert mmd2_biased(sx, sy, 1.0) == pytest.approx(
            mmd2_biased_loop(sx, sy, 1.0), abs=1e-12)
        assert mmd2_biased(sx, sy, 1.0) >= 0.0

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            mmd2_biased(np.zeros((0, 1, 1)), np.zeros((2, 1, 1)), 1.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        # the U-statistic couples records pairwise, so reordering must be
        # joint; the biased estimator is invariant under independent shuffles
        r = np.random.default_rng(seed)
        sx = r.standard_normal((5, 2, 2))
        sy = r.standard_normal((5, 2, 2))
        perm = r.permutation(5)
        perm_other = r.permutation(5)
        assert mmd2_unbiased(sx[perm], sy[perm], 1.0) == pytest.approx(
            mmd2_unbiased(sx, sy, 1.0), abs=1e-12)
        assert mmd2_biased(sx[perm], sy[perm_other], 1.0) == pytest.approx(
            mmd2_biased(sx, sy, 1.0), abs=1e-12)
        h = kernel_bundle(sx, sy, 1.0).h_matrix
        hp = kernel_bundle(sx[perm], sy[perm], 1.0).h_matrix
        assert variance_h1(hp) == pytest.approx(variance_h1(h), abs=1e-12)
        assert variance_h1(h) == pytest.approx(variance_h1_loop(h), abs=1e-12)


class TestBundleInvariants:
    def test_h_matrix_diagonal_identity(self, rng):
        sx = rng.standard_normal((4, 2, 2))
        sy = rng.standard_normal((4, 2, 2))
        bundle = kernel_bundle(sx, sy, 1.0)
        h = bundle.h_matrix
        assert np.allclose(np.diag(h),
                           np.diag(bundle.kxx) + np.diag(bundle.kyy)
                           - 2.0 * np.diag(bundle.kxy), atol=1e-15)
        assert np.allclose(bundle.kxx, bundle.kxx.T, atol=1e-15)
        assert np.all(bundle.kxx > 0) and np.all(bundle.kxx <= 1.0)


class TestVariance:
    def test_constant_matrix_is_exact_zero(self):
        for n, c in ((4, 3.7), (7, -0.123), (5, np.pi)):
            assert variance_h1(np.full((n, n), c)) == 0.0

    def test_two_by_two_hand_value(self):
        assert variance_h1(np.array([[0.0, 1.0], [1.0, 0.0]])) == 0.0

    def test_three_by_three_hand_value(self):
        h = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        assert variance_h1(h) == 8.0 / 81.0

    def test_matches_loop_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 9))
            h = rng.standard_normal((n, n))
            h = h + h.T
            assert variance_h1(h) == pytest.approx(variance_h1_loop(h), abs=1e-12)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            variance_h1(np.zeros((2, 3)))


class TestObjective:
    def test_paired_identical_batches_give_zero(self, rng):
        e = rng.standard_normal((4, 3, 5))
        params = init_params(5, 8, 1, seed=3)
        value, _ = kernel_mmd.test_power_objective(e, e, params)
        assert value == 0.0

    def test_zero_variance_algebraic_limit(self):
        # two identical points per side: H is constant, variance is exactly 0,
        # so J = mmd2 / sqrt(lambda)
        params = identity_scalar_params()
        ex = np.zeros((2, 1, 1))
        ey = np.full((2, 1, 1), 0.5)
        lam = 1e-8
        value, bundle = kernel_mmd.test_power_objective(ex, ey, params, lam)
        mmd2 = mmd2_unbiased_from_h(bundle.h_matrix)
        assert value == pytest.approx(mmd2 * 1e4, rel=1e-9)

    def test_two_point_composition(self):
        # with lambda = 1 and a zero-variance instance, J equals the
        # hand-expanded two-point MMD of the projected signatures
        params = identity_scalar_params()
        ex = np.zeros((2, 1, 1))
        ey = np.full((2, 1, 1), 2.0)
        value, _ = kernel_mmd.test_power_objective(ex, ey, params, lam=1.0)
        sig = float(np.tanh(np.tanh(2.0)))
        expected = 2.0 - 2.0 * np.exp(-sig * sig / 2.0)
        assert value == pytest.approx(expected, rel=1e-9)

    def test_objective_composes_public_pieces(self, rng):
        from mdmf.pfs import project_batch

        ex = rng.standard_normal((5, 2, 3))
        ey = rng.standard_normal((5, 2, 3)) + 0.5
        params = init_params(3, 4, 2, seed=9)
        lam = 1.0
        value, _ = kernel_mmd.test_power_objective(ex, ey, params, lam)
        zx = project_batch(ex, params)
        zy = project_batch(ey, params)
        mmd2 = mmd2_unbiased(zx, zy, params.gamma)
        var = variance_h1(kernel_bundle(zx, zy, params.gamma).h_matrix)
        assert value == pytest.approx(mmd2 / np.sqrt(var + lam), rel=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        max_rel = _gradient_fd_max_rel_error(rng, instances=5)
        assert max_rel < 1e-4

    def test_gradient_zero_at_paired_identity(self, rng):
        e = rng.standard_normal((4, 2, 3))
        params = init_params(3, 6, 1, seed=5)
        value, stats, grads = objective_value_and_gradients(e, e, params)
        assert value == 0.0
        for arr in (grads.w1, grads.b1, grads.w2, grads.b2):
            assert np.allclose(arr, 0.0, atol=1e-12)
        assert grads.log_gamma == pytest.approx(0.0, abs=1e-12)

    def test_log_gamma_gradient_closed_form(self):
        # two identical points per side at signature distance r: H is constant,
        # variance is 0, J = (2 - 2 exp(-t)) / sqrt(lam) with t = r^2/(2 g^2),
        # so dJ/dlog gamma = -4 t exp(-t) / sqrt(lam).
        params = identity_scalar_params(log_gamma=0.3)
        ex = np.zeros((2, 1, 1))
        ey = np.full((2, 1, 1), 1.5)
        lam = 0.5
        _, _, grads = objective_value_and_gradients(ex, ey, params, lam)
        r = float(np.tanh(np.tanh(1.5)))  # signature of 1.5 under the tanh-tanh net
        gamma = np.exp(0.3)
        t = r * r / (2.0 * gamma * gamma)
        expected = -4.0 * t * np.exp(-t) / np.sqrt(lam)
        assert grads.log_gamma == pytest.approx(expected, rel=1e-9)


def mmd2_unbiased_from_h(h: np.ndarray) -> float:
    n = h.shape[0]
    return float((h.sum() - np.trace(h)) / (n * (n - 1)))


def _gradient_fd_max_rel_error(rng, instances=20, step=1e-5):
    max_rel = 0.0
    for _ in range(instances):
        ex = rng.standard_normal((4, 3, 5))
        ey = rng.standard_normal((4, 3, 5)) + 0.3
        params = init_params(5, 8, 1, seed=int(rng.integers(1_000_000)))
        lam = 1e-8
        _, _, grads = objective_value_and_gradients(ex, ey, params, lam)

        def value_of(p):
            v, _ = kernel_mmd.test_power_objective(ex, ey, p, lam)
            return v

        for name in ("w1", "b1", "w2", "b2"):
            arr = getattr(params, name)
            grad = np.atleast_1d(getattr(grads, name))
            flat = arr.reshape(-1)
            flat_grad = grad.reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + step
                up = value_of(params)
                flat[idx] = orig - step
                down = value_of(params)
                flat[idx] = orig
                fd = (up - down) / (2.0 * step)
                rel = abs(flat_grad[idx] - fd) / max(abs(fd), 1e-6)
                max_rel = max(max_rel, rel)
        orig = params.log_gamma
        params.log_gamma = orig + step
        up = value_of(params)
        params.log_gamma = orig - step
        down = value_of(params)
        params.log_gamma = orig
        fd = (up - down) / (2.0 * step)
        max_rel = max(max_rel, abs(grads.log_gamma - fd) / max(abs(fd), 1e-6))
    return max_rel

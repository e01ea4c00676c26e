import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exprensemble.core import ValidationError
from exprensemble.focal import (
    FocalLossParams,
    focal_loss,
    focal_loss_batch,
    focal_loss_from_logits,
    focal_loss_grad,
    focal_loss_grad_batch,
    softmax,
)

from fd_oracle import central_difference, relative_error


def vector_with(p_k, k=0):
    rest = (1.0 - p_k) / 7
    p = np.full(8, rest)
    p[k] = p_k
    return p


class TestFocalLossValue:
    def test_gamma_zero_is_cross_entropy(self):
        params = FocalLossParams(alpha=1.0, gamma=0.0)
        assert focal_loss(vector_with(0.5), 0, params) == pytest.approx(0.693147, abs=1e-6)

    def test_certain_prediction_has_zero_loss(self):
        p = np.zeros(8)
        p[3] = 1.0
        assert focal_loss(p, 3, FocalLossParams(alpha=0.7, gamma=3.5)) == 0.0

    def test_scalar_value(self):
        # 0.25 * 0.1**2 * -ln(0.9), evaluated by hand
        params = FocalLossParams(alpha=0.25, gamma=2.0)
        assert focal_loss(vector_with(0.9, k=2), 2, params) == pytest.approx(2.6340e-4, rel=1e-4)
        assert focal_loss(vector_with(0.9, k=2), 2, params) == pytest.approx(0.25 * 0.01 * -math.log(0.9), rel=1e-12)

    def test_zero_probability_is_clamped(self):
        p = np.zeros(8)
        p[1] = 1.0
        loss = focal_loss(p, 0, FocalLossParams(alpha=1.0, gamma=0.0))
        assert loss == pytest.approx(-math.log(1e-12))

    def test_defaults(self):
        params = FocalLossParams()
        assert params.alpha == (1.0,) * 8 and params.gamma == (2.0,) * 8

    @pytest.mark.parametrize("kw", [{"alpha": -1.0}, {"gamma": float("nan")}, {"alpha": [1.0] * 7}])
    def test_params_validated(self, kw):
        with pytest.raises((ValidationError, ValueError)):
            FocalLossParams(**kw)

    def test_invalid_vector(self):
        with pytest.raises(ValidationError):
            focal_loss(np.full(8, 0.2), 0)


class TestFocalLossBatch:
    def test_duplicate_sample(self):
        s = (vector_with(0.3, 4), 4)
        assert focal_loss_batch([s, s]) == pytest.approx(focal_loss(*s))

    def test_mean(self):
        a, b = (vector_with(0.3, 4), 4), (vector_with(0.8, 1), 1)
        assert focal_loss_batch([a, b]) == pytest.approx((focal_loss(*a) + focal_loss(*b)) / 2)

    def test_empty(self):
        with pytest.raises(ValidationError):
            focal_loss_batch([])


class TestFocalLossGradient:
    def test_cross_entropy_identity(self, rng):
        params = FocalLossParams.cross_entropy()
        for _ in range(50):
            z = rng.normal(0, 3, 8)
            k = int(rng.integers(8))
            expected = softmax(z) - np.eye(8)[k]
            np.testing.assert_allclose(focal_loss_grad(z, k, params), expected, atol=1e-15)

    def test_flat_at_minimum(self):
        z = np.zeros(8)
        z[5] = 60.0
        g = focal_loss_grad(z, 5, FocalLossParams(alpha=0.5, gamma=2.0))
        assert np.abs(g).max() < 1e-40

    def test_matches_finite_differences(self, rng):
        params = FocalLossParams(alpha=0.25, gamma=2.0)
        for _ in range(20):
            z = rng.normal(0, 2, 8)
            k = int(rng.integers(8))
            fd = central_difference(z, k, 0.25, 2.0)
            assert relative_error(focal_loss_grad(z, k, params), fd).max() < 1e-5

    def test_fractional_gamma_near_certainty(self):
        # gamma < 1 makes (1-p)**(gamma-1) blow up; the product must stay finite.
        z = np.zeros(8)
        z[0] = 30.0
        g = focal_loss_grad(z, 0, FocalLossParams(alpha=1.0, gamma=0.5))
        assert np.all(np.isfinite(g))
        fd = central_difference(z, 0, 1.0, 0.5)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-30)

    def test_clamped_region_is_consistent(self):
        z = np.zeros(8)
        z[1] = 40.0  # p_0 ~ 4e-18, inside the log clamp
        params = FocalLossParams(alpha=1.0, gamma=2.0)
        g = focal_loss_grad(z, 0, params)
        h = 1e-4
        fd = np.array(
            [
                (focal_loss_from_logits(z + h * e, [0], params)[0] - focal_loss_from_logits(z - h * e, [0], params)[0]) / (2 * h)
                for e in np.eye(8)
            ]
        )
        np.testing.assert_allclose(g, fd, atol=1e-12)

    def test_batch_matches_single(self, rng):
        z = rng.normal(0, 2, (10, 8))
        y = rng.integers(0, 8, 10)
        params = FocalLossParams(alpha=rng.uniform(0.1, 1, 8), gamma=rng.uniform(0, 4, 8))
        batch = focal_loss_grad_batch(z, y, params)
        for i in range(10):
            np.testing.assert_array_equal(batch[i], focal_loss_grad(z[i], y[i], params))

    def test_rejects_non_finite(self):
        z = np.zeros(8)
        z[2] = np.inf
        with pytest.raises(ValidationError, match="class 2"):
            focal_loss_grad(z, 0)

    def test_softmax_survives_large_logits(self):
        p = softmax(np.array([1000.0, 999.0] + [0.0] * 6))
        assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0)


probability_vectors = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).dirichlet(np.ones(8) * 0.5))


class TestProperties:
    @given(probability_vectors, st.integers(0, 7), st.floats(0, 5), st.floats(0, 2))
    def test_non_negative(self, p, k, gamma, alpha):
        p = p / p.sum()
        assert focal_loss(p, k, FocalLossParams(alpha=alpha, gamma=gamma)) >= 0.0

    @given(st.integers(0, 7), st.floats(0, 5), st.floats(0.05, 1), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
    def test_strictly_decreasing_in_true_probability(self, k, gamma, alpha, p_lo, step):
        params = FocalLossParams(alpha=alpha, gamma=gamma)
        lo, hi = vector_with(p_lo, k), vector_with(min(p_lo + step, 0.999), k)
        assert focal_loss(hi, k, params) < focal_loss(lo, k, params)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 10))
    @settings(max_examples=100)
    def test_alpha_linearity(self, seed, c):
        rng = np.random.default_rng(seed)
        z = rng.normal(0, 2, 8)
        k = int(rng.integers(8))
        alpha = rng.uniform(0.05, 1, 8)
        gamma = rng.uniform(0, 5, 8)
        scaled = alpha.copy()
        scaled[k] *= c
        base, other = FocalLossParams(alpha, gamma), FocalLossParams(scaled, gamma)
        p = softmax(z)
        assert focal_loss(p, k, other) == pytest.approx(c * focal_loss(p, k, base), rel=1e-12, abs=1e-300)
        np.testing.assert_allclose(focal_loss_grad(z, k, other), c * focal_loss_grad(z, k, base), rtol=1e-12, atol=1e-300)

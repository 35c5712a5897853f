from __future__ import annotations

import math

import numpy as np
import pytest

from unrank.errors import NumericError, ValidationError
from unrank.scorers import (
    PairLoss,
    ScorerKind,
    ScorerParams,
    ShapeMeta,
    grad,
    init_params,
    load_checkpoint,
    loss_value,
    save_checkpoint,
    score,
    score_gradient,
    sgd_step,
)


def biencoder_identity(d: int) -> ScorerParams:
    shape = ShapeMeta(d_feat=d, embed_dim=d)
    eye = np.eye(d).ravel()
    return ScorerParams(ScorerKind.BIENCODER, shape, np.concatenate([eye, eye]))


def random_params(kind: ScorerKind, rng: np.random.Generator, d: int = 5) -> ScorerParams:
    shape = ShapeMeta(d_feat=d, embed_dim=3, hidden_dim=4)
    return ScorerParams(kind, shape, rng.standard_normal(shape.weight_count(kind)))


def central_difference(params: ScorerParams, loss: PairLoss, step: float = 1e-5) -> np.ndarray:
    out = np.zeros(params.size)
    base = params.weights
    for i in range(params.size):
        bumped = base.copy()
        bumped[i] = base[i] + step
        up = loss_value(params.with_weights(bumped), loss)
        bumped[i] = base[i] - step
        down = loss_value(params.with_weights(bumped), loss)
        out[i] = (up - down) / (2.0 * step)
    return out


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def identity_loss(q: np.ndarray, d: np.ndarray) -> PairLoss:
    return PairLoss(pairs=((q, d),), fn=lambda s: (float(s[0]), np.ones(1)))


class TestScore:
    def test_biencoder_identity_unit_vectors(self):
        params = biencoder_identity(2)
        e0 = np.array([1.0, 0.0])
        assert score(params, e0, e0) == 1.0

    def test_biencoder_orthogonal_vectors(self):
        params = biencoder_identity(2)
        assert score(params, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_crossmlp_zero_hidden_weights_gives_bias_path_value(self):
        # With W = 0 the hidden layer sees only the bias, so the score is
        # readout . tanh(bias); checked against hand arithmetic.
        shape = ShapeMeta(d_feat=2, hidden_dim=2)
        w = np.zeros(shape.weight_count(ScorerKind.CROSSMLP))
        w[8] = 0.5   # bias[0]
        w[9] = -1.0  # bias[1]
        w[10] = 2.0  # readout[0]
        w[11] = 3.0  # readout[1]
        params = ScorerParams(ScorerKind.CROSSMLP, shape, w)
        expected = 2.0 * math.tanh(0.5) + 3.0 * math.tanh(-1.0)
        got = score(params, np.array([4.0, 5.0]), np.array([6.0, 7.0]))
        assert got == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch_raises(self):
        params = biencoder_identity(2)
        with pytest.raises(ValidationError, match="d_feat"):
            score(params, np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0]))

    def test_score_is_pure(self):
        rng = np.random.default_rng(0)
        params = random_params(ScorerKind.CROSSMLP, rng)
        q, d = rng.standard_normal(5), rng.standard_normal(5)
        assert score(params, q, d) == score(params, q, d)

    def test_biencoder_bilinear_in_query_features(self):
        rng = np.random.default_rng(1)
        params = random_params(ScorerKind.BIENCODER, rng)
        q, d = rng.standard_normal(5), rng.standard_normal(5)
        base = score(params, q, d)
        assert score(params, 2.0 * q, d) == 2.0 * base  # power-of-two scale: exact
        alpha = 1.7
        assert score(params, alpha * q, d) == pytest.approx(alpha * base, rel=1e-12)


class TestGrad:
    def test_biencoder_gradient_is_outer_product(self):
        rng = np.random.default_rng(2)
        params = random_params(ScorerKind.BIENCODER, rng)
        q, d = rng.standard_normal(5), rng.standard_normal(5)
        e, df = 3, 5
        e_q = params.weights[: e * df].reshape(e, df)
        e_d = params.weights[e * df :].reshape(e, df)
        expected = np.concatenate([np.outer(e_d @ d, q).ravel(), np.outer(e_q @ q, d).ravel()])
        np.testing.assert_allclose(score_gradient(params, q, d), expected, rtol=1e-15)

    def test_inactive_hinge_has_zero_gradient(self):
        rng = np.random.default_rng(3)
        params = random_params(ScorerKind.BIENCODER, rng)
        q, d = rng.standard_normal(5), rng.standard_normal(5)
        cap = score(params, q, d) + 1.0  # score stays below the cap: hinge off

        def fn(s):
            active = s[0] > cap
            return max(0.0, float(s[0]) - cap), np.array([1.0 if active else 0.0])

        value, g = grad(params, PairLoss(pairs=((q, d),), fn=fn))
        assert value == 0.0
        assert not np.any(g)

    @pytest.mark.parametrize("kind", [ScorerKind.BIENCODER, ScorerKind.CROSSMLP])
    def test_gradients_match_central_differences(self, kind):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(100):
            params = random_params(kind, rng)
            q, d = rng.standard_normal(5), rng.standard_normal(5)
            loss = identity_loss(q, d)
            _, analytic = grad(params, loss)
            numeric = central_difference(params, loss)
            worst = max(worst, max_relative_error(analytic, numeric))
        assert worst < 1e-4

    def test_composite_hinge_loss_matches_central_differences(self):
        rng = np.random.default_rng(5)
        params = random_params(ScorerKind.CROSSMLP, rng)
        q = rng.standard_normal(5)
        d1, d2 = rng.standard_normal(5), rng.standard_normal(5)

        def fn(s):  # margin hinge between two scored pairs
            gap = 1.0 - s[0] + s[1]
            if gap > 0:
                return float(gap), np.array([-1.0, 1.0])
            return 0.0, np.zeros(2)

        loss = PairLoss(pairs=((q, d1), (q, d2)), fn=fn)
        value, analytic = grad(params, loss)
        if value > 1e-3:  # away from the kink: finite differences are valid
            numeric = central_difference(params, loss)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_non_finite_weights_rejected_with_layer_named(self):
        rng = np.random.default_rng(6)
        params = random_params(ScorerKind.BIENCODER, rng)
        q, d = rng.standard_normal(5), rng.standard_normal(5)
        huge = params.with_weights(np.full(params.size, 1e200))
        with pytest.raises(NumericError, match="projection"):
            score(huge, q * 1e200, d)


class TestSgdStep:
    def test_zero_gradient_is_identity(self):
        params = init_params(ScorerKind.BIENCODER, 4, seed=0)
        stepped = sgd_step(params, np.zeros(params.size), lr=0.1)
        np.testing.assert_array_equal(stepped.weights, params.weights)

    def test_basic_arithmetic(self):
        shape = ShapeMeta(d_feat=1, embed_dim=1)
        params = ScorerParams(ScorerKind.BIENCODER, shape, np.array([1.0, 1.0]))
        stepped = sgd_step(params, np.array([2.0, 2.0]), lr=0.5)
        np.testing.assert_array_equal(stepped.weights, np.array([0.0, 0.0]))

    def test_converges_on_convex_quadratic(self):
        # loss = 0.5 * ||w - target||^2, whose gradient is w - target
        target = np.linspace(-1.0, 1.0, 32)
        params = init_params(ScorerKind.BIENCODER, 4, seed=1, embed_dim=4)
        for _ in range(200):
            params = sgd_step(params, params.weights - target, lr=0.2)
        assert float(np.max(np.abs(params.weights - target))) < 1e-6

    def test_nonpositive_lr_rejected(self):
        params = init_params(ScorerKind.BIENCODER, 4, seed=0)
        with pytest.raises(ValidationError, match="learning rate"):
            sgd_step(params, np.zeros(params.size), lr=0.0)


class TestParamsAndCheckpoints:
    def test_weight_count_validation(self):
        shape = ShapeMeta(d_feat=4, embed_dim=2)
        with pytest.raises(ValidationError, match="weight vector"):
            ScorerParams(ScorerKind.BIENCODER, shape, np.zeros(3))

    def test_weights_are_frozen(self):
        params = init_params(ScorerKind.CROSSMLP, 4, seed=0)
        with pytest.raises(ValueError):
            params.weights[0] = 5.0

    def test_init_is_seed_deterministic_and_bounded(self):
        a = init_params(ScorerKind.BIENCODER, 6, seed=9)
        b = init_params(ScorerKind.BIENCODER, 6, seed=9)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert float(np.max(np.abs(a.weights))) < 0.1

    @pytest.mark.parametrize("kind", [ScorerKind.BIENCODER, ScorerKind.CROSSMLP])
    def test_checkpoint_roundtrip_is_exact(self, tmp_path, kind):
        params = init_params(kind, 5, seed=3, embed_dim=3, hidden_dim=4)
        save_checkpoint(params, tmp_path / "ckpt.json")
        loaded = load_checkpoint(tmp_path / "ckpt.json")
        assert loaded.kind == params.kind
        np.testing.assert_array_equal(loaded.weights, params.weights)

    def test_checkpoint_shape_validated_on_load(self, tmp_path):
        params = init_params(ScorerKind.BIENCODER, 5, seed=3, embed_dim=3)
        save_checkpoint(params, tmp_path / "ckpt.json")
        text = (tmp_path / "ckpt.json").read_text().replace('"embed_dim": 3', '"embed_dim": 4')
        (tmp_path / "ckpt.json").write_text(text)
        with pytest.raises(ValidationError, match="weight vector"):
            load_checkpoint(tmp_path / "ckpt.json")

    def test_unknown_format_version_rejected(self, tmp_path):
        params = init_params(ScorerKind.BIENCODER, 5, seed=3, embed_dim=3)
        save_checkpoint(params, tmp_path / "ckpt.json")
        text = (tmp_path / "ckpt.json").read_text().replace('"format_version": 1', '"format_version": 99')
        (tmp_path / "ckpt.json").write_text(text)
        with pytest.raises(ValidationError, match="format_version"):
            load_checkpoint(tmp_path / "ckpt.json")

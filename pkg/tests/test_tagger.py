"""Feature hashing, softmax forward, analytic gradients, checkpoints."""

import numpy as np
import pytest

from bondner.corpus import Sentence
from bondner.errors import CheckpointError, NumericalError
from bondner.tagger import (
    FeatureConfig,
    FeatureMatrix,
    FeatureVector,
    ModelParams,
    _token_feature_names,
    featurize,
    forward,
    grad_loss,
    init_params,
    load_params,
    predict_labels,
    save_params,
)

CONFIG = FeatureConfig(window=1, dim=2**10, hash_seed=7)


def sent(text):
    return Sentence.from_texts(text.split())


def matrix(sentence, config=CONFIG):
    return FeatureMatrix.from_vectors([featurize(sentence, config)], config.dim)


class TestFeatureConfig:
    def test_dim_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            FeatureConfig(dim=1000)

    def test_negative_window_rejected(self):
        with pytest.raises(ValueError):
            FeatureConfig(window=-1)

    def test_digest_is_stable_and_distinguishes_configs(self):
        assert FeatureConfig().digest() == FeatureConfig().digest()
        assert FeatureConfig(window=2).digest() != FeatureConfig(window=1).digest()
        assert FeatureConfig(hash_seed=1).digest() != FeatureConfig(hash_seed=2).digest()
        assert len(FeatureConfig().digest()) == 16


class TestFeaturize:
    def test_window_zero_families(self):
        names = _token_feature_names(("Paris",), 0, FeatureConfig(window=0))
        assert "id:0:paris" in names
        assert "sh:0:Xxxxx" in names
        assert "pre:3:par" in names
        assert "suf:3:ris" in names
        assert len(names) == 8
        assert not any(n.startswith("bnd") for n in names)

    def test_boundary_markers_at_edges(self):
        names = _token_feature_names(("Paris", "talks"), 0, CONFIG)
        assert "bnd:-1:bos" in names
        names = _token_feature_names(("Paris", "talks"), 1, CONFIG)
        assert "bnd:1:eos" in names

    def test_short_token_affixes(self):
        names = _token_feature_names(("ab",), 0, FeatureConfig(window=0))
        assert "pre:1:a" in names and "pre:2:ab" in names
        assert not any(n.startswith("pre:3") for n in names)

    def test_identity_is_case_folded_but_shape_is_not(self):
        a = featurize(sent("Paris"), CONFIG)[0]
        b = featurize(sent("paris"), CONFIG)[0]
        c = featurize(sent("Paris"), CONFIG)[0]
        assert np.array_equal(a.indices, c.indices)
        assert not np.array_equal(a.indices, b.indices)

    def test_determinism_and_range(self):
        rng = np.random.default_rng(5)
        words = ["Alpha", "beta-2", "GAMMA", "x", "Y.", "42"]
        for _ in range(50):
            s = sent(" ".join(words[int(rng.integers(len(words)))] for _ in range(4)))
            va = featurize(s, CONFIG)
            vb = featurize(s, CONFIG)
            for fa, fb in zip(va, vb):
                assert np.array_equal(fa.indices, fb.indices)
                assert fa.indices.min() >= 0 and fa.indices.max() < CONFIG.dim

    def test_indices_unique(self):
        for vec in featurize(sent("alpha alpha alpha"), CONFIG):
            assert len(np.unique(vec.indices)) == len(vec.indices)

    def test_feature_vector_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FeatureVector(np.array([2**10]), 2**10)


class TestForward:
    def test_zero_weights_give_uniform(self):
        params = ModelParams(np.zeros((CONFIG.dim, 4)), seed=0)
        preds = forward(params, matrix(sent("one two three")))
        np.testing.assert_array_equal(preds.probs, np.full((3, 4), 0.25))

    def test_simplex_invariant(self):
        params = init_params(CONFIG.dim, 5, seed=3)
        preds = forward(params, matrix(sent("alpha Beta GAMMA delta")))
        assert (preds.probs >= 0).all()
        np.testing.assert_allclose(preds.probs.sum(axis=1), 1.0, atol=1e-9)

    def test_large_margin_saturates(self):
        vec = FeatureVector(np.array([0]), dim=8)
        fm = FeatureMatrix.from_vectors([[vec]], dim=8)
        W = np.zeros((8, 3))
        W[0, 0] = 20.0
        preds = forward(ModelParams(W, seed=0), fm)
        assert preds.probs[0, 0] > 1 - 1e-6

    def test_shift_invariance(self):
        vec = FeatureVector(np.array([2]), dim=8)
        fm = FeatureMatrix.from_vectors([[vec]], dim=8)
        rng = np.random.default_rng(9)
        W = rng.normal(size=(8, 4))
        shifted = W.copy()
        shifted[2, :] += 3.5
        a = forward(ModelParams(W, seed=0), fm).probs
        b = forward(ModelParams(shifted, seed=0), fm).probs
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_non_finite_params_rejected(self):
        W = np.zeros((CONFIG.dim, 3))
        W[0, 0] = np.nan
        with pytest.raises(NumericalError):
            forward(ModelParams(W, seed=0), matrix(sent("a")))

    def test_single_class_degenerate(self):
        params = init_params(CONFIG.dim, 1, seed=0)
        preds = forward(params, matrix(sent("anything goes")))
        np.testing.assert_array_equal(preds.probs, np.ones((2, 1)))

    def test_sentence_offsets(self):
        config = CONFIG
        fm = FeatureMatrix.from_vectors(
            [featurize(sent("a b"), config), featurize(sent("c"), config)], config.dim
        )
        preds = forward(init_params(config.dim, 3, 0), fm)
        assert [len(p) for p in preds.per_sentence()] == [2, 1]


def fd_gradient(params, fm, target, mask, h=1e-5):
    """Central finite differences of the loss in grad_loss, coordinatewise."""
    W = params.W
    out = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            orig = W[i, j]
            W[i, j] = orig + h
            up = grad_loss(params, fm, target, mask)[1]
            W[i, j] = orig - h
            down = grad_loss(params, fm, target, mask)[1]
            W[i, j] = orig
            out[i, j] = (up - down) / (2 * h)
    return out


def max_rel_err(a, b, floor=1e-5):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


class TestGradLoss:
    SMALL = FeatureConfig(window=1, dim=2**5, hash_seed=13)

    def _random_case(self, rng, soft_target):
        words = ["aa", "Bb", "CC", "dd", "Ee"]
        n = int(rng.integers(2, 6))
        s = sent(" ".join(words[int(rng.integers(len(words)))] for _ in range(n)))
        fm = FeatureMatrix.from_vectors([featurize(s, self.SMALL)], self.SMALL.dim)
        C = 3
        params = ModelParams(rng.normal(scale=0.5, size=(self.SMALL.dim, C)), seed=0)
        mask = rng.random(n) < 0.8
        if soft_target:
            raw = rng.random((n, C)) + 0.05
            target = raw / raw.sum(axis=1, keepdims=True)
        else:
            target = rng.integers(0, C, size=n)
        return params, fm, target, mask

    def test_gradient_matches_finite_differences_hard(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            params, fm, target, mask = self._random_case(rng, soft_target=False)
            if not mask.any():
                mask[0] = True
            analytic, _ = grad_loss(params, fm, target, mask)
            numeric = fd_gradient(params, fm, target, mask)
            assert max_rel_err(analytic, numeric) < 1e-4

    def test_gradient_matches_finite_differences_soft(self):
        rng = np.random.default_rng(37)
        for _ in range(5):
            params, fm, target, mask = self._random_case(rng, soft_target=True)
            if not mask.any():
                mask[0] = True
            analytic, _ = grad_loss(params, fm, target, mask)
            numeric = fd_gradient(params, fm, target, mask)
            assert max_rel_err(analytic, numeric) < 1e-4

    def test_zero_gradient_at_stationary_point(self):
        params = init_params(self.SMALL.dim, 3, seed=1)
        fm = FeatureMatrix.from_vectors([featurize(sent("aa Bb"), self.SMALL)], self.SMALL.dim)
        target = forward(params, fm).probs
        grad, _ = grad_loss(params, fm, target)
        np.testing.assert_array_equal(grad, np.zeros_like(grad))

    def test_all_masked_gives_zero(self):
        params = init_params(self.SMALL.dim, 3, seed=1)
        fm = FeatureMatrix.from_vectors([featurize(sent("aa Bb"), self.SMALL)], self.SMALL.dim)
        grad, loss = grad_loss(params, fm, np.array([0, 1]), np.zeros(2, dtype=bool))
        assert loss == 0.0
        assert not grad.any()

    def test_target_shape_validation(self):
        params = init_params(self.SMALL.dim, 3, seed=1)
        fm = FeatureMatrix.from_vectors([featurize(sent("aa Bb"), self.SMALL)], self.SMALL.dim)
        with pytest.raises(ValueError):
            grad_loss(params, fm, np.array([0, 1, 2]))
        with pytest.raises(ValueError):
            grad_loss(params, fm, np.zeros((2, 5)))


class TestInitParams:
    def test_seed_reproducibility(self):
        a = init_params(64, 3, seed=11)
        b = init_params(64, 3, seed=11)
        np.testing.assert_array_equal(a.W, b.W)
        c = init_params(64, 3, seed=12)
        assert (a.W != c.W).any()

    def test_range_and_shape(self):
        p = init_params(128, 5, seed=0)
        assert p.W.shape == (128, 5)
        assert (np.abs(p.W) <= 0.01).all()
        assert p.version == 0

    def test_initial_snapshot_regenerates(self):
        p = init_params(64, 3, seed=11)
        p.W += 1.0
        p.version = 5
        snap = p.initial_snapshot()
        np.testing.assert_array_equal(snap.W, init_params(64, 3, 11).W)
        assert snap.version == 0

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError):
            init_params(0, 3, seed=0)


class TestPredictLabels:
    def test_argmax_with_low_index_ties(self):
        vec = FeatureVector(np.array([0]), dim=4)
        fm = FeatureMatrix.from_vectors([[vec]], dim=4)
        preds = predict_labels(ModelParams(np.zeros((4, 3)), seed=0), fm)
        assert preds.tolist() == [0]


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        config = FeatureConfig(window=1, dim=2**6, hash_seed=3)
        params = init_params(config.dim, 4, seed=9)
        params.W[5, 2] = 0.123456789
        path = tmp_path / "model.bin"
        save_params(params, config, path)
        loaded = load_params(path, expected_config=config)
        np.testing.assert_array_equal(loaded.W, params.W)
        assert loaded.seed == 9
        np.testing.assert_array_equal(
            loaded.initial_snapshot().W, init_params(config.dim, 4, 9).W
        )

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 100)
        with pytest.raises(CheckpointError):
            load_params(path)

    def test_truncated_rejected(self, tmp_path):
        config = FeatureConfig(window=1, dim=2**6, hash_seed=3)
        params = init_params(config.dim, 4, seed=9)
        path = tmp_path / "model.bin"
        save_params(params, config, path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(CheckpointError):
            load_params(path)

    def test_config_digest_mismatch_rejected(self, tmp_path):
        config = FeatureConfig(window=1, dim=2**6, hash_seed=3)
        params = init_params(config.dim, 4, seed=9)
        path = tmp_path / "model.bin"
        save_params(params, config, path)
        other = FeatureConfig(window=2, dim=2**6, hash_seed=3)
        with pytest.raises(CheckpointError):
            load_params(path, expected_config=other)

    def test_dim_mismatch_rejected(self, tmp_path):
        config = FeatureConfig(window=1, dim=2**6, hash_seed=3)
        params = init_params(2**7, 4, seed=9)
        with pytest.raises(CheckpointError):
            save_params(params, config, tmp_path / "model.bin")

"""Model assembly, backpropagation through stacks and GRU weight transplant"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from numpy.testing import assert_allclose  # noqa: E402

from errors import ModelStateError, ParameterError  # noqa: E402
from layers import GRU, Dense, Softmax, TcnBlock  # noqa: E402
from model import (  # noqa: E402
    DONOR_LAYERS,
    Model,
    build_articulatory_model,
    build_ctc_model,
    build_regression_model,
    length_mask,
    transplant_gru_weights,
)


def small_model(seed=0):
    rng = np.random.default_rng(seed)
    return Model("small", [
        GRU("gru", 3, 4, rng),
        TcnBlock("tcn", 4, 3, rng, dilations=(1, 2)),
        Dense("dense", 3, 5, rng),
        Softmax("softmax", 5),
    ])


def model_loss(model, x, G):
    return float(np.sum(model.forward(x) * G))


class TestCensus:
    def test_gru128_on_kpca_input(self):
        assert GRU("g", 30, 128).num_parameters() == 61056

    def test_ctc_base_layers(self):
        model = build_ctc_model(d_in=30, vocab_plus_blank=29)
        assert model.layer_names == ["gru128", "gru64", "tcn32", "dense", "softmax"]
        assert model.frozen_layers() == []
        assert model.output_dim == 29

    def test_ctc_extended_layers(self):
        model = build_ctc_model(d_in=30, vocab_plus_blank=29, variant="extended")
        assert model.layer_names == ["gru128", "gru64", "adapter", "gru128_donor", "gru64_donor",
                                     "tcn32", "dense", "softmax"]
        assert model.frozen_layers() == list(DONOR_LAYERS)
        assert model.layer("adapter").output_dim() == 19

    def test_regression_layers(self):
        model = build_regression_model(d_in=30, d_out=19)
        assert [layer.name for layer in model.gru_layers()] == ["gru128", "gru64"]
        assert model.output_dim == 19

    def test_articulatory_layers(self):
        model = build_articulatory_model(d_in=30, d_out=6, filters=16)
        assert model.layer_names == ["tcn16", "dropout", "dense"]
        assert model.output_dim == 6

    def test_bad_vocabulary(self):
        with pytest.raises(ParameterError):
            build_ctc_model(vocab_plus_blank=1)

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError, match="expects input dimension"):
            Model("bad", [Dense("a", 2, 3), Dense("b", 4, 1)])

    def test_duplicate_names(self):
        with pytest.raises(ParameterError):
            Model("bad", [Dense("a", 2, 2), Dense("a", 2, 2)])


class TestForward:
    def test_probabilities_sum_to_one(self):
        model = build_ctc_model(d_in=30, vocab_plus_blank=29, seed=3)
        x = np.random.default_rng(0).normal(size=(2, 7, 30))
        probs = model.forward(x)
        assert probs.shape == (2, 7, 29)
        assert np.all(probs >= 0)
        assert_allclose(probs.sum(axis=-1), 1.0)

    def test_skip_softmax_returns_logits(self):
        model = small_model()
        x = np.random.default_rng(1).normal(size=(6, 3))
        logits = model.forward(x, skip_softmax=True)
        probs = model.forward(x)
        shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
        assert_allclose(probs, shifted / shifted.sum(axis=-1, keepdims=True))

    def test_single_sequence_shape(self):
        out = small_model().forward(np.zeros((4, 3)))
        assert out.shape == (4, 5)

    def test_infer_is_deterministic(self):
        model = build_regression_model(d_in=5, d_out=2, seed=1)
        x = np.random.default_rng(2).normal(size=(1, 5, 5))
        assert np.array_equal(model.forward(x), model.forward(x))


class TestBackward:
    def test_gradients_match_finite_differences(self):
        model = small_model()
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 5, 3))
        G = rng.normal(size=(2, 5, 5))
        model.forward(x)
        grads, dx = model.backward(G)
        assert set(grads) == set(model.parameters())

        eps = 1e-5
        for key, param in model.parameters().items():
            for idx in list(np.ndindex(param.shape))[:6]:
                orig = param[idx]
                param[idx] = orig + eps
                plus = model_loss(model, x, G)
                param[idx] = orig - eps
                minus = model_loss(model, x, G)
                param[idx] = orig
                assert grads[key][idx] == pytest.approx((plus - minus) / (2 * eps), rel=1e-4, abs=1e-8), key

        for idx in [(0, 0, 0), (1, 4, 2), (0, 2, 1)]:
            shifted = x.copy()
            shifted[idx] += eps
            plus = model_loss(model, shifted, G)
            shifted[idx] -= 2 * eps
            minus = model_loss(model, shifted, G)
            assert dx[idx] == pytest.approx((plus - minus) / (2 * eps), rel=1e-4, abs=1e-8)

    def test_frozen_layers_absent_but_propagate(self):
        model = small_model()
        x = np.random.default_rng(5).normal(size=(1, 4, 3))
        G = np.random.default_rng(6).normal(size=(1, 4, 5))
        model.forward(x)
        _, dx_all = model.backward(G)

        model.freeze(["gru"])
        model.forward(x)
        grads, dx_frozen = model.backward(G)
        assert not any(key.startswith("gru/") for key in grads)
        assert "dense/W" in grads
        assert_allclose(dx_frozen, dx_all)

    def test_backward_before_forward(self):
        with pytest.raises(ModelStateError):
            small_model().backward(np.zeros((1, 2, 5)))

    def test_trainable_only_parameters(self):
        model = build_ctc_model(d_in=4, vocab_plus_blank=3, variant="extended")
        keys = model.parameters(trainable_only=True)
        assert not any(key.startswith("gru128_donor/") for key in keys)
        assert "adapter/W" in keys


class TestTransplant:
    def test_weights_copied(self):
        source = build_regression_model(d_in=30, d_out=19, seed=1)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29, seed=2)
        transplant_gru_weights(source, target)
        for name in ("gru128", "gru64"):
            for key, value in source.layer(name).params.items():
                assert np.array_equal(target.layer(name).params[key], value)

    def test_value_semantics(self):
        source = build_regression_model(d_in=30, d_out=19, seed=1)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29, seed=2)
        transplant_gru_weights(source, target)
        before = target.layer("gru128").params["W_z"].copy()
        source.layer("gru128").params["W_z"] += 1.0
        assert np.array_equal(target.layer("gru128").params["W_z"], before)

    def test_other_layers_untouched(self):
        source = build_regression_model(d_in=30, d_out=19, seed=1)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29, seed=2)
        dense_before = target.layer("dense").params["W"].copy()
        transplant_gru_weights(source, target)
        assert np.array_equal(target.layer("dense").params["W"], dense_before)

    def test_shape_mismatch_leaves_target_unchanged(self):
        source = build_regression_model(d_in=20, d_out=19, seed=1)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29, seed=2)
        before = {k: v.copy() for k, v in target.parameters().items()}
        with pytest.raises(ParameterError, match="Cannot transplant"):
            transplant_gru_weights(source, target)
        for key, value in target.parameters().items():
            assert np.array_equal(value, before[key])

    def test_donor_slots(self):
        acoustic = build_ctc_model(d_in=19, vocab_plus_blank=29, seed=4)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29, variant="extended", seed=2)
        transplant_gru_weights(acoustic, target, target_layers=DONOR_LAYERS)
        for src_name, dst_name in zip(("gru128", "gru64"), DONOR_LAYERS):
            assert np.array_equal(target.layer(dst_name).params["U_h"], acoustic.layer(src_name).params["U_h"])

    def test_source_without_two_grus(self):
        source = build_articulatory_model(d_in=30, filters=8)
        target = build_ctc_model(d_in=30, vocab_plus_blank=29)
        with pytest.raises(ParameterError):
            transplant_gru_weights(source, target)


class TestUtilities:
    def test_length_mask(self):
        mask = length_mask([3, 1], 2, 4)
        assert mask.tolist() == [[True, True, True, False], [True, False, False, False]]

    def test_length_mask_out_of_range(self):
        with pytest.raises(ParameterError):
            length_mask([5], 1, 4)

    def test_copy_is_independent(self):
        model = small_model()
        clone = model.copy()
        clone.layer("dense").params["b"] += 1.0
        assert not np.array_equal(clone.layer("dense").params["b"], model.layer("dense").params["b"])

    def test_topology_round_trip(self):
        model = build_ctc_model(d_in=6, vocab_plus_blank=4, variant="extended", batchnorm=True)
        rebuilt = Model.from_topology(model.name, model.topology())
        assert rebuilt.layer_names == model.layer_names
        assert rebuilt.frozen_layers() == model.frozen_layers()
        assert rebuilt.num_parameters() == model.num_parameters()

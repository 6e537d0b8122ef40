"""Matrix files and checkpoint containers"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from errors import FormatError, MissingArtifactError  # noqa: E402
from kpca import fit_kpca, transform  # noqa: E402
from model import build_ctc_model  # noqa: E402
from recording import FeatureSequence  # noqa: E402
from storage import (  # noqa: E402
    decode_checkpoint,
    decode_matrix,
    encode_checkpoint,
    encode_matrix,
    load_features,
    load_kpca,
    load_model,
    read_matrix,
    save_features,
    save_kpca,
    save_model,
    write_matrix,
)


class TestMatrix:
    def test_layout(self):
        data = encode_matrix(np.array([[1.0, 2.0, 3.0]]))
        assert data[:4] == b"NDX1"
        assert np.frombuffer(data[4:16], dtype="<u4").tolist() == [2, 1, 3]
        assert len(data) == 16 + 3 * 8

    def test_file_round_trip_is_exact(self, tmp_path):
        values = np.random.default_rng(0).normal(size=(7, 5))
        path = write_matrix(tmp_path / "sub" / "x.ndx", values)
        assert np.array_equal(read_matrix(path), values)

    def test_empty_rows(self):
        assert decode_matrix(encode_matrix(np.zeros((0, 4)))).shape == (0, 4)

    def test_truncated(self):
        data = encode_matrix(np.ones((2, 2)))
        with pytest.raises(FormatError, match="Truncated matrix values"):
            decode_matrix(data[:-3])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError, match="trailing"):
            decode_matrix(encode_matrix(np.ones(2)) + b"\x00")

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="byte offset 0"):
            decode_matrix(b"JUNKJUNK")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError) as info:
            read_matrix(tmp_path / "absent.ndx")
        assert info.value.missing == [str(tmp_path / "absent.ndx")]


def test_feature_names_sidecar(tmp_path):
    features = FeatureSequence(np.arange(6.0).reshape(3, 2), 100.0, ["Fz_mean", "Fz_std"])
    path = save_features(tmp_path / "f.ndx", features)
    loaded = load_features(path)
    assert loaded.names == ["Fz_mean", "Fz_std"]
    assert np.array_equal(loaded.frames, features.frames)


class TestCheckpoint:
    def test_container_round_trip(self):
        tensors = {"a": np.arange(6.0).reshape(2, 3), "b/c": np.array([1.5])}
        loaded, descriptor = decode_checkpoint(encode_checkpoint(tensors, {"kind": "x", "n": 2}))
        assert descriptor == {"kind": "x", "n": 2}
        assert list(loaded) == ["a", "b/c"]
        assert np.array_equal(loaded["a"], tensors["a"])

    def test_version_rejected(self):
        data = bytearray(encode_checkpoint({"a": np.ones(1)}, {}))
        data[4:8] = np.array([9], dtype="<u4").tobytes()
        with pytest.raises(FormatError, match="Unsupported checkpoint version 9"):
            decode_checkpoint(bytes(data))

    def test_truncated(self):
        data = encode_checkpoint({"a": np.ones((4, 4))}, {"kind": "x"})
        with pytest.raises(FormatError, match="Truncated"):
            decode_checkpoint(data[:-8])

    def test_undecodable_entry_name(self):
        data = encode_checkpoint({"zq": np.ones(2)}, {"kind": "x"})
        at = data.index(b"zq")
        corrupted = data[:at] + b"\xff\xfe" + data[at + 2:]
        with pytest.raises(FormatError, match="Unreadable entry name") as info:
            decode_checkpoint(corrupted)
        assert info.value.offset == at

    def test_model_round_trip(self, tmp_path):
        model = build_ctc_model(d_in=5, vocab_plus_blank=4, variant="extended", batchnorm=True, seed=3)
        x = np.random.default_rng(1).normal(size=(2, 6, 5))
        model.forward(x, mode="train", rng=np.random.default_rng(0))
        path = save_model(tmp_path / "m.ckpt", model, {"inputs": "kpca"})
        loaded, meta = load_model(path)
        assert meta == {"inputs": "kpca"}
        assert loaded.layer_names == model.layer_names
        assert loaded.frozen_layers() == model.frozen_layers()
        assert np.array_equal(loaded.forward(x), model.forward(x))

    def test_model_file_of_wrong_kind(self, tmp_path):
        X = np.random.default_rng(2).normal(size=(12, 3))
        path = save_kpca(tmp_path / "k.ckpt", fit_kpca(X, n_components=2))
        with pytest.raises(FormatError, match="not a model"):
            load_model(path)

    def test_kpca_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 4))
        model = fit_kpca(X, n_components=3)
        extra = {"feature_mean": X.mean(axis=0)}
        loaded, extras = load_kpca(save_kpca(tmp_path / "k.ckpt", model, extra))
        assert np.array_equal(extras["feature_mean"], extra["feature_mean"])
        queries = rng.normal(size=(5, 4))
        assert np.array_equal(transform(loaded, queries), transform(model, queries))

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_model(tmp_path / "none.ckpt")

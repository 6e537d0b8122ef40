"""Tests for EEG window statistics, MFCC and target assembly"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from numpy.testing import assert_allclose  # noqa: E402

from errors import ChannelLookupError, ParameterError  # noqa: E402
from features import (  # noqa: E402
    N_MEL_FILTERS,
    concat_targets,
    extract_eeg_features,
    extract_mfcc,
    mel_filterbank,
    select_channels,
    select_feature_columns,
    window_stats,
)
from recording import EEG_WINDOW, FeatureSequence, RawRecording, WindowConfig  # noqa: E402
from utils import FRONTAL_CHANNELS, SCALP_CHANNELS, TEMPORAL_CHANNELS  # noqa: E402


def _eeg(n_channels=31, seconds=1.0, seed=0, labels=None):
    labels = labels or SCALP_CHANNELS[:n_channels]
    samples = np.random.default_rng(seed).normal(size=(len(labels), int(seconds * 1000)))
    return RawRecording(samples, 1000.0, labels)


class TestWindowStats:
    def test_alternating_unit_signal(self):
        s = window_stats([1, -1, 1, -1], 1000.0)
        assert s["rms"] == pytest.approx(1.0)
        assert s["zcr"] == pytest.approx(1.0)
        assert s["mwa"] == pytest.approx(0.0)
        assert s["kurtosis"] == pytest.approx(1.0)
        assert s["pse"] == pytest.approx(0.0, abs=1e-12)

    def test_constant_signal(self):
        s = window_stats([2, 2, 2, 2], 1000.0)
        assert s == pytest.approx({"rms": 2.0, "zcr": 0.0, "mwa": 2.0, "kurtosis": 0.0, "pse": 0.0}, abs=1e-12)

    def test_white_noise_has_high_entropy(self):
        x = np.random.default_rng(3).normal(size=1000)
        assert window_stats(x, 1000.0)["pse"] > 0.9

    def test_zeros_do_not_count_as_crossings(self):
        assert window_stats([1, 0, -1, 0, 1], 1000.0)["zcr"] == 0.0

    def test_short_window(self):
        with pytest.raises(ParameterError):
            window_stats([1, 2, 3], 1000.0)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            s = window_stats(rng.standard_t(3, size=50), 1000.0)
            assert s["rms"] >= 0
            assert 0 <= s["zcr"] <= 1
            assert 0 <= s["pse"] <= 1
            assert s["kurtosis"] >= 1 - 1e-12

    def test_scale_covariance(self):
        x = np.random.default_rng(5).normal(size=100)
        base, scaled = window_stats(x, 1000.0), window_stats(3.0 * x, 1000.0)
        assert scaled["rms"] == pytest.approx(3.0 * base["rms"])
        assert scaled["mwa"] == pytest.approx(3.0 * base["mwa"])
        for key in ("zcr", "kurtosis", "pse"):
            assert scaled[key] == pytest.approx(base[key], rel=1e-9)


class TestEegFeatures:
    def test_shape_and_names(self):
        feats = extract_eeg_features(_eeg(seconds=10.0))
        assert feats.frames.shape == (991, 155)
        assert feats.frame_rate_hz == 100.0
        assert feats.names[:2] == [f"{SCALP_CHANNELS[0]}.rms", f"{SCALP_CHANNELS[0]}.zcr"]

    @pytest.mark.parametrize("n_samples", [100, 109, 110, 1234])
    def test_frame_count_formula(self, n_samples):
        rec = RawRecording(np.ones((1, n_samples)), 1000.0, ["T7"])
        assert extract_eeg_features(rec).n_frames == (n_samples - 100) // 10 + 1

    def test_zero_recording(self):
        feats = extract_eeg_features(RawRecording(np.zeros((2, 500)), 1000.0, ["T7", "T8"]))
        assert np.all(feats.frames == 0.0)

    def test_temporal_subset_dimension(self):
        rec = select_channels(_eeg(), TEMPORAL_CHANNELS)
        assert extract_eeg_features(rec).dim == 20

    def test_frontal_subset_dimension(self):
        rec = select_channels(_eeg(), FRONTAL_CHANNELS)
        assert rec.n_channels == 12
        assert extract_eeg_features(rec).dim == 60

    def test_selection_commutes_with_extraction(self):
        rec = _eeg(seconds=0.5)
        labels = ["TP10", "T7", "Fz"]
        direct = extract_eeg_features(select_channels(rec, labels))
        via_columns = select_feature_columns(extract_eeg_features(rec), labels)
        assert direct.names == via_columns.names
        assert_allclose(direct.frames, via_columns.frames, rtol=1e-12, atol=1e-12)

    def test_select_all_is_identity(self):
        rec = _eeg(seconds=0.2)
        same = select_channels(rec, SCALP_CHANNELS)
        assert np.array_equal(same.samples, rec.samples)

    def test_unknown_label(self):
        with pytest.raises(ChannelLookupError, match="XX9"):
            select_channels(_eeg(), ["T7", "XX9"])

    def test_too_short(self):
        with pytest.raises(ParameterError):
            extract_eeg_features(RawRecording(np.ones((1, 50)), 1000.0, ["T7"]))

    def test_wrong_feature_rate(self):
        with pytest.raises(ParameterError):
            extract_eeg_features(_eeg(seconds=0.5), WindowConfig(100, 20))

    def test_default_window(self):
        assert (EEG_WINDOW.window_samples, EEG_WINDOW.hop_samples) == (100, 10)


class TestMfcc:
    def _speech(self, samples):
        return RawRecording(np.atleast_2d(samples), 16000.0, ["speech"])

    def test_silence_maps_to_log_floor(self):
        feats = extract_mfcc(self._speech(np.zeros(16000)))
        expected_c0 = np.sqrt(N_MEL_FILTERS) * np.log(1e-10)
        assert_allclose(feats.frames[:, 0], expected_c0, rtol=1e-12)
        assert_allclose(feats.frames[:, 1:], 0.0, atol=1e-9)

    def test_shape(self):
        x = np.random.default_rng(0).normal(size=16000)
        feats = extract_mfcc(self._speech(x), n_coeffs=13)
        assert feats.frames.shape == (98, 13)
        assert feats.frame_rate_hz == 100.0
        assert np.all(np.isfinite(feats.frames))

    def test_multichannel_rejected(self):
        with pytest.raises(ParameterError):
            extract_mfcc(RawRecording(np.zeros((2, 16000)), 16000.0, ["a", "b"]))

    def test_coefficient_range(self):
        with pytest.raises(ParameterError):
            extract_mfcc(self._speech(np.zeros(16000)), n_coeffs=27)

    def test_filterbank_rows_are_triangles(self):
        bank = mel_filterbank(26, 512, 16000.0)
        assert bank.shape == (26, 257)
        assert np.all(bank >= 0) and np.all(bank <= 1)


class TestConcatTargets:
    def _seq(self, n, d, rate=100.0, prefix="f"):
        return FeatureSequence(np.arange(n * d, dtype=float).reshape(n, d), rate, [f"{prefix}{i}" for i in range(d)])

    def test_nineteen_columns(self):
        out = concat_targets(self._seq(50, 13, prefix="mfcc"), self._seq(50, 6, prefix="tv"))
        assert out.frames.shape == (50, 19)
        assert out.names[0] == "mfcc0" and out.names[13] == "tv0"

    def test_trims_to_shorter(self):
        out = concat_targets(self._seq(40, 13), self._seq(41, 6))
        assert out.n_frames == 40

    def test_rate_mismatch(self):
        with pytest.raises(ParameterError):
            concat_targets(self._seq(40, 13), self._seq(40, 6, rate=50.0))

    def test_gap_too_large(self):
        with pytest.raises(ParameterError):
            concat_targets(self._seq(40, 13), self._seq(45, 6))

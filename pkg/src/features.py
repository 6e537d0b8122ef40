"""
Frame-level feature extraction
EEG window statistics, MFCC, channel selection and target concatenation
"""
import logging
from typing import Dict, List

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy import signal, stats

from errors import ChannelLookupError, ParameterError
from recording import EEG_WINDOW, FeatureSequence, RawRecording, WindowConfig

logger = logging.getLogger(__name__)

STAT_NAMES = ["rms", "zcr", "mwa", "kurtosis", "pse"]
FEATURE_RATE_HZ = 100.0
DEGENERATE_VARIANCE = 1e-12

PRE_EMPHASIS = 0.97
N_MEL_FILTERS = 26
LOG_FLOOR = 1e-10


def _stats_over_last_axis(windows: np.ndarray) -> np.ndarray:
    """Five statistics over the last axis; returns windows.shape[:-1] + (5,)"""
    n = windows.shape[-1]

    rms = np.sqrt(np.mean(windows ** 2, axis=-1))

    # Strict sign changes between neighbours; zeros never count
    crossings = (windows[..., :-1] * windows[..., 1:]) < 0
    zcr = crossings.sum(axis=-1) / (n - 1)

    mwa = windows.mean(axis=-1)

    m2 = windows.var(axis=-1)
    degenerate = m2 < DEGENERATE_VARIANCE
    with np.errstate(invalid="ignore", divide="ignore"):
        kurt = stats.kurtosis(windows, axis=-1, fisher=False, bias=True)
    kurt = np.where(degenerate, 0.0, kurt)

    _, power = signal.periodogram(windows, window="boxcar", detrend=False,
                                  return_onesided=True, scaling="spectrum", axis=-1)
    n_bins = power.shape[-1]
    total = power.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, power / np.where(total > 0, total, 1.0), 0.0)
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    entropy = -plogp.sum(axis=-1)
    pse = entropy / np.log(n_bins) if n_bins > 1 else np.zeros_like(entropy)
    pse = np.clip(pse, 0.0, 1.0)

    return np.stack([rms, zcr, mwa, kurt, pse], axis=-1)


def window_stats(window, fs: float) -> Dict[str, float]:
    """
    Root mean square, zero crossing rate, moving window average (window mean),
    Pearson kurtosis and normalized power spectral entropy of one window
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 1 or x.size < 4:
        raise ParameterError(f"Window needs at least 4 samples, got {x.size}")
    if not fs > 0:
        raise ParameterError(f"Sample rate must be positive, got {fs}")
    values = _stats_over_last_axis(x[np.newaxis, :])[0]
    return dict(zip(STAT_NAMES, (float(v) for v in values)))


def _check_feature_rate(fs: float, cfg: WindowConfig):
    rate = fs / cfg.hop_samples
    if abs(rate - FEATURE_RATE_HZ) > 1e-9:
        raise ParameterError(
            f"Window hop {cfg.hop_samples} at {fs} Hz gives {rate:g} frames/s, expected {FEATURE_RATE_HZ:g}"
        )


def extract_eeg_features(recording: RawRecording, cfg: WindowConfig = EEG_WINDOW) -> FeatureSequence:
    """
    Windowed statistics for every channel
    Columns are channel-major, statistic-minor: T7.rms, T7.zcr, ..., T8.rms, ...
    """
    _check_feature_rate(recording.sample_rate_hz, cfg)
    n_frames = cfg.frame_count(recording.n_samples)
    if n_frames == 0:
        raise ParameterError(
            f"Recording of {recording.n_samples} samples is shorter than one "
            f"{cfg.window_samples}-sample window"
        )
    if cfg.window_samples < 4:
        raise ParameterError("EEG windows need at least 4 samples")

    windows = sliding_window_view(recording.samples, cfg.window_samples, axis=-1)[:, ::cfg.hop_samples]
    windows = windows[:, :n_frames]
    per_channel = _stats_over_last_axis(windows)          # [C x T x 5]
    frames = per_channel.transpose(1, 0, 2).reshape(n_frames, -1)
    names = [f"{label}.{stat}" for label in recording.channel_labels for stat in STAT_NAMES]
    logger.debug("Extracted EEG features %s from %d channels", frames.shape, recording.n_channels)
    return FeatureSequence(frames, FEATURE_RATE_HZ, names)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, nfft: int, fs: float) -> np.ndarray:
    """Triangular filters evenly spaced in mel between 0 Hz and fs/2; [n_filters x nfft//2+1]"""
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(fs / 2.0), n_filters + 2)
    bins = np.floor((nfft + 1) * mel_to_hz(mel_points) / fs).astype(int)
    bins = np.minimum(bins, nfft // 2)

    bank = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        left, centre, right = bins[j], bins[j + 1], bins[j + 2]
        for i in range(left, centre):
            bank[j, i] = (i - left) / (centre - left)
        for i in range(centre, right):
            bank[j, i] = (right - i) / (right - centre)
    return bank


def extract_mfcc(speech: RawRecording, n_coeffs: int = 13, cfg: WindowConfig = None) -> FeatureSequence:
    """
    MFCCs at 100 frames/s

    Pre-emphasis 0.97, Hamming window, power spectrum, 26 mel filters,
    log floored at 1e-10, orthonormal DCT-II, first n_coeffs coefficients.
    """
    if speech.n_channels != 1:
        raise ParameterError(f"MFCC extraction needs a single-channel signal, got {speech.n_channels}")
    fs = speech.sample_rate_hz
    if cfg is None:
        cfg = WindowConfig(window_samples=int(round(0.025 * fs)), hop_samples=int(round(fs / FEATURE_RATE_HZ)))
    _check_feature_rate(fs, cfg)
    if not 1 <= n_coeffs <= N_MEL_FILTERS:
        raise ParameterError(f"n_coeffs must be in [1, {N_MEL_FILTERS}], got {n_coeffs}")

    x = speech.samples[0]
    n_frames = cfg.frame_count(x.size)
    if n_frames == 0:
        raise ParameterError(f"Speech of {x.size} samples is shorter than one window")

    emphasized = np.append(x[0], x[1:] - PRE_EMPHASIS * x[:-1])
    frames = sliding_window_view(emphasized, cfg.window_samples)[::cfg.hop_samples][:n_frames]
    frames = frames * np.hamming(cfg.window_samples)

    nfft = 1
    while nfft < cfg.window_samples:
        nfft *= 2
    power = np.abs(np.fft.rfft(frames, nfft, axis=-1)) ** 2 / nfft

    energies = power @ mel_filterbank(N_MEL_FILTERS, nfft, fs).T
    log_energies = np.log(np.maximum(energies, LOG_FLOOR))
    cepstra = sp_fft.dct(log_energies, type=2, axis=-1, norm="ortho")[:, :n_coeffs]

    names = [f"mfcc{i}" for i in range(n_coeffs)]
    return FeatureSequence(cepstra, FEATURE_RATE_HZ, names)


def select_channels(recording: RawRecording, labels: List[str]) -> RawRecording:
    """Restrict and reorder rows to the requested labels"""
    index = {label: i for i, label in enumerate(recording.channel_labels)}
    rows = []
    for label in labels:
        if label not in index:
            raise ChannelLookupError(label, recording.channel_labels)
        rows.append(index[label])
    return RawRecording(recording.samples[rows], recording.sample_rate_hz, list(labels))


def select_feature_columns(features: FeatureSequence, labels: List[str]) -> FeatureSequence:
    """Column subset of an EEG feature sequence for the given channel labels"""
    index = {name: i for i, name in enumerate(features.names)}
    columns = []
    for label in labels:
        for stat in STAT_NAMES:
            name = f"{label}.{stat}"
            if name not in index:
                raise ChannelLookupError(label, sorted({n.split(".")[0] for n in features.names}))
            columns.append(index[name])
    return FeatureSequence(features.frames[:, columns], features.frame_rate_hz,
                           [features.names[c] for c in columns])


def concat_targets(mfcc: FeatureSequence, artic: FeatureSequence, max_length_gap: int = 2) -> FeatureSequence:
    """MFCC columns followed by articulatory columns, trimmed to the shorter sequence"""
    if abs(mfcc.frame_rate_hz - artic.frame_rate_hz) > 1e-9:
        raise ParameterError(
            f"Frame rate mismatch: MFCC {mfcc.frame_rate_hz} Hz vs articulatory {artic.frame_rate_hz} Hz"
        )
    gap = abs(mfcc.n_frames - artic.n_frames)
    if gap > max_length_gap:
        raise ParameterError(f"Sequence lengths differ by {gap} frames (max {max_length_gap})")
    n = min(mfcc.n_frames, artic.n_frames)
    frames = np.hstack([mfcc.frames[:n], artic.frames[:n]])
    return FeatureSequence(frames, mfcc.frame_rate_hz, mfcc.names + artic.names)

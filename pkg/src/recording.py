"""
Signal and feature containers shared by the preprocessing stages
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from errors import ParameterError


@dataclass(frozen=True, eq=False)
class RawRecording:
    """
    Multichannel time-domain signal

    samples: [channels x time] float64
    sample_rate_hz: positive sampling rate
    channel_labels: one label per row of samples
    """
    samples: np.ndarray
    sample_rate_hz: float
    channel_labels: List[str]

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ParameterError(f"samples must be [channels x time], got shape {samples.shape}")
        labels = list(self.channel_labels)
        if samples.shape[0] != len(labels):
            raise ParameterError(
                f"{samples.shape[0]} signal rows but {len(labels)} channel labels"
            )
        if len(set(labels)) != len(labels):
            raise ParameterError("Channel labels must be unique")
        if not self.sample_rate_hz > 0:
            raise ParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("Recording contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray) -> "RawRecording":
        return RawRecording(samples, self.sample_rate_hz, self.channel_labels)


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Frame-synchronous feature matrix [T x D] with column names"""
    frames: np.ndarray
    frame_rate_hz: float
    names: List[str]

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ParameterError(f"frames must be [T x D], got shape {frames.shape}")
        names = list(self.names)
        if frames.shape[1] != len(names):
            raise ParameterError(f"{frames.shape[1]} feature columns but {len(names)} names")
        if not self.frame_rate_hz > 0:
            raise ParameterError(f"frame_rate_hz must be positive, got {self.frame_rate_hz}")
        if not np.all(np.isfinite(frames)):
            raise ParameterError("Feature sequence contains non-finite values")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "frame_rate_hz", float(self.frame_rate_hz))
        object.__setattr__(self, "names", names)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def trimmed(self, n_frames: int) -> "FeatureSequence":
        return FeatureSequence(self.frames[:n_frames], self.frame_rate_hz, self.names)


@dataclass(frozen=True)
class WindowConfig:
    """Analysis window length and hop, both in samples"""
    window_samples: int
    hop_samples: int

    def __post_init__(self):
        if int(self.window_samples) <= 0 or int(self.hop_samples) <= 0:
            raise ParameterError("window_samples and hop_samples must be positive")
        if self.hop_samples > self.window_samples:
            raise ParameterError(
                f"hop_samples ({self.hop_samples}) exceeds window_samples ({self.window_samples})"
            )

    def frame_count(self, n_samples: int) -> int:
        """Number of full windows: floor((N - window) / hop) + 1, or 0"""
        if n_samples < self.window_samples:
            return 0
        return (n_samples - self.window_samples) // self.hop_samples + 1


EEG_WINDOW = WindowConfig(window_samples=100, hop_samples=10)
SPEECH_WINDOW = WindowConfig(window_samples=400, hop_samples=160)

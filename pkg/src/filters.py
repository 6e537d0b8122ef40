"""
IIR preprocessing filters for raw multichannel recordings
Butterworth bandpass and power-line notch, realized as second-order sections
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from errors import ParameterError
from recording import RawRecording

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IirFilter:
    """
    Cascade of second-order sections

    sections: [K x 5] rows of (b0, b1, b2, a1, a2), a0 normalized to 1
    """
    sections: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        sections = np.array(self.sections, dtype=np.float64, copy=True)
        if sections.ndim != 2 or sections.shape[1] != 5 or sections.shape[0] == 0:
            raise ParameterError(f"sections must be a non-empty [K x 5] array, got {sections.shape}")
        if not self.sample_rate_hz > 0:
            raise ParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        for i, (_, _, _, a1, a2) in enumerate(sections):
            poles = np.roots([1.0, a1, a2])
            if np.any(np.abs(poles) >= 1.0):
                raise ParameterError(f"Section {i} is unstable (pole radius {np.abs(poles).max():.6f})")
        sections.setflags(write=False)
        object.__setattr__(self, "sections", sections)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def sos(self) -> np.ndarray:
        """scipy-style [K x 6] second-order-section matrix"""
        sos = np.empty((self.sections.shape[0], 6))
        sos[:, 0:3] = self.sections[:, 0:3]
        sos[:, 3] = 1.0
        sos[:, 4:6] = self.sections[:, 3:5]
        return sos

    @classmethod
    def from_sos(cls, sos: np.ndarray, fs: float) -> "IirFilter":
        sos = np.asarray(sos, dtype=np.float64)
        # Normalize each section so that a0 = 1
        a0 = sos[:, 3:4]
        sos = sos / a0
        return cls(np.column_stack([sos[:, 0:3], sos[:, 4:6]]), fs)

    def cascade(self, other: "IirFilter") -> "IirFilter":
        """Series connection of two filters at the same rate"""
        if abs(other.sample_rate_hz - self.sample_rate_hz) > 1e-9:
            raise ParameterError("Cannot cascade filters with different sample rates")
        return IirFilter(np.vstack([self.sections, other.sections]), self.sample_rate_hz)


def _check_band_frequency(name: str, value: float, fs: float):
    if not 0 < value < fs / 2:
        raise ParameterError(f"{name}={value} Hz must lie strictly between 0 and Nyquist ({fs / 2} Hz)")


def design_bandpass(low_hz: float, high_hz: float, order: int, fs: float) -> IirFilter:
    """
    Butterworth bandpass of total order `order` (even), bilinear transform

    The lowpass prototype has order/2 poles; the band transformation doubles it.
    """
    if not fs > 0:
        raise ParameterError(f"Sample rate must be positive, got {fs}")
    if order < 2 or order % 2 != 0:
        raise ParameterError(f"Bandpass order must be even and >= 2, got {order}")
    _check_band_frequency("low_hz", low_hz, fs)
    _check_band_frequency("high_hz", high_hz, fs)
    if not low_hz < high_hz:
        raise ParameterError(f"low_hz ({low_hz}) must be below high_hz ({high_hz})")

    sos = signal.butter(order // 2, [low_hz, high_hz], btype="bandpass", output="sos", fs=fs)
    logger.debug("Designed bandpass %.3f-%.3f Hz, order %d, %d sections", low_hz, high_hz, order, len(sos))
    return IirFilter.from_sos(sos, fs)


def design_notch(f0_hz: float, quality: float = 30.0, fs: float = 1000.0) -> IirFilter:
    """Second-order notch with a null at f0_hz and unity gain at DC and Nyquist"""
    if not fs > 0:
        raise ParameterError(f"Sample rate must be positive, got {fs}")
    _check_band_frequency("f0_hz", f0_hz, fs)
    if not quality > 0:
        raise ParameterError(f"Quality factor must be positive, got {quality}")

    b, a = signal.iirnotch(f0_hz, quality, fs=fs)
    sos = signal.tf2sos(b, a)
    return IirFilter.from_sos(sos, fs)


def identity_filter(fs: float) -> IirFilter:
    """Single pass-through section"""
    return IirFilter(np.array([[1.0, 0.0, 0.0, 0.0, 0.0]]), fs)


def apply_filter(filt: IirFilter, recording: RawRecording) -> RawRecording:
    """
    Filter every channel independently
    Direct-form II transposed sections, zero initial state, causal (no zero-phase pass)
    """
    if abs(filt.sample_rate_hz - recording.sample_rate_hz) > 1e-9:
        raise ParameterError(
            f"Filter designed for {filt.sample_rate_hz} Hz applied to a "
            f"{recording.sample_rate_hz} Hz recording"
        )
    filtered = signal.sosfilt(filt.sos, recording.samples, axis=-1)
    return recording.with_samples(filtered)


def frequency_response(filt: IirFilter, freq_hz: float) -> complex:
    """Complex gain of the cascade at freq_hz"""
    fs = filt.sample_rate_hz
    if not 0 <= freq_hz <= fs / 2:
        raise ParameterError(f"Frequency {freq_hz} Hz outside [0, {fs / 2}] Hz")
    _, h = signal.sosfreqz(filt.sos, worN=[float(freq_hz)], fs=fs)
    return complex(h[0])


def magnitude_db(filt: IirFilter, freq_hz: float) -> float:
    """Gain in decibels at freq_hz (-inf for an exact null)"""
    gain = abs(frequency_response(filt, freq_hz))
    if gain == 0.0:
        return float("-inf")
    return 20.0 * np.log10(gain)


def preprocess_eeg(recording: RawRecording, low_hz: float = 0.1, high_hz: float = 70.0,
                   order: int = 4, notch_hz: float = 60.0, notch_quality: float = 30.0) -> RawRecording:
    """Bandpass then notch, as applied to every raw EEG recording"""
    fs = recording.sample_rate_hz
    chain = design_bandpass(low_hz, high_hz, order, fs).cascade(design_notch(notch_hz, notch_quality, fs))
    return apply_filter(chain, recording)


def response_table(filt: IirFilter, freqs_hz: Sequence[float]) -> np.ndarray:
    """[F x 2] rows of (frequency, magnitude dB) for inspection reports"""
    return np.array([[f, magnitude_db(filt, f)] for f in freqs_hz])

"""
Synthetic speech/EEG corpus

Each character drives a fixed 6-dim articulatory target held for a random
dwell and smoothed; speech is a harmonic tone modulated by those latents and
EEG is a fixed linear mixture of them plus pink noise. With infinite SNR the
EEG is exactly a linear image of the latents.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.ndimage import uniform_filter1d

from errors import ParameterError
from manifest import UtteranceRecord, write_manifest
from storage import write_matrix
from utils import ARTICULATORY_NAMES, DEFAULT_CHARACTERS, SCALP_CHANNELS, make_rng

logger = logging.getLogger(__name__)

DEFAULT_SENTENCES = [
    "the cat sat",
    "a red sun",
    "we can go",
    "it is cold",
    "she ran home",
    "the boy was there when the sun rose",
    "a rod is used to catch pink salmon",
    "the source of the huge river is the clear spring",
    "kick the ball straight and follow through",
    "help the woman get back to her feet",
    "a pot of tea helps to pass the evening",
    "smoky fires lack flame and heat",
    "the soft cushion broke the man's fall",
    "the salt breeze came across from the sea",
    "the girl at the booth sold fifty bonds",
    "the small pup gnawed a hole in the sock",
    "the fish twisted and turned on the bent hook",
    "press the pants and sew a button on the vest",
    "the swan dive was far short of perfect",
    "the beauty of the view stunned the young boy",
    "two blue fish swam in the tank",
    "her purse was full of useless trash",
    "the colt reared and threw the tall rider",
    "it snowed rained and hailed the same morning",
    "read verse out loud for pleasure",
    "hoist the load to your left shoulder",
    "take the winding path to reach the lake",
    "note closely the size of the gas tank",
    "wipe the grease off his dirty face",
    "mend the coat before you go out",
]

CONDITIONS = {"noisy": 5.0, "clean": 20.0}
N_LATENTS = len(ARTICULATORY_NAMES)


@dataclass
class SynthSpec:
    sentences: List[str] = field(default_factory=lambda: list(DEFAULT_SENTENCES))
    subjects: int = 7
    repetitions: int = 3
    channels: int = len(SCALP_CHANNELS)
    eeg_rate_hz: float = 1000.0
    speech_rate_hz: float = 16000.0
    condition: str = "noisy"
    snr_db: Optional[float] = None       # None: condition default; inf: noise free
    dwell_ms: tuple = (80, 160)
    smoothing_ms: int = 50
    pad_ms: int = 200
    characters: str = DEFAULT_CHARACTERS

    def __post_init__(self):
        if self.channels != len(SCALP_CHANNELS):
            raise ParameterError(f"Synthetic EEG has {len(SCALP_CHANNELS)} channels, got {self.channels}")
        if not (self.eeg_rate_hz > 0 and self.speech_rate_hz > 0):
            raise ParameterError("Sample rates must be positive")
        if self.condition not in CONDITIONS:
            raise ParameterError(f"condition must be one of {sorted(CONDITIONS)}, got {self.condition!r}")
        if self.subjects < 1 or self.repetitions < 1 or not self.sentences:
            raise ParameterError("Need at least one subject, repetition and sentence")
        low, high = self.dwell_ms
        if not 0 < low <= high:
            raise ParameterError(f"Invalid dwell range {self.dwell_ms}")
        for sentence in self.sentences:
            bad = [ch for ch in sentence if ch not in self.characters]
            if bad or not sentence:
                raise ParameterError(f"Sentence {sentence!r} is empty or uses characters outside the alphabet")

    @property
    def effective_snr_db(self) -> float:
        return CONDITIONS[self.condition] if self.snr_db is None else float(self.snr_db)

    @property
    def n_utterances(self) -> int:
        return self.subjects * self.repetitions * len(self.sentences)


@dataclass(eq=False)
class SynthUtterance:
    latents: np.ndarray   # [6 x N] at the EEG rate
    eeg: np.ndarray       # [31 x N]
    speech: np.ndarray    # [1 x M]
    artic: np.ndarray     # [T x 6] at 100 frames/s


def character_targets(spec: SynthSpec, seed: int) -> np.ndarray:
    """Fixed [n_characters x 6] articulatory target table"""
    return make_rng(seed, 10).uniform(-1.0, 1.0, size=(len(spec.characters), N_LATENTS))


def mixing_matrix(spec: SynthSpec, seed: int) -> np.ndarray:
    """Fixed [31 x 6] latent-to-electrode mixing"""
    return make_rng(seed, 11).normal(size=(spec.channels, N_LATENTS))


def pink_noise(rng: np.random.Generator, shape, fs: float) -> np.ndarray:
    """Gaussian noise with 1/f power, unit variance per row"""
    n = shape[-1]
    white = rng.normal(size=shape)
    spectrum = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    weights = np.ones_like(freqs)
    weights[1:] = 1.0 / np.sqrt(freqs[1:])
    weights[0] = 0.0
    noise = np.fft.irfft(spectrum * weights, n=n, axis=-1)
    std = noise.std(axis=-1, keepdims=True)
    return noise / np.where(std > 0, std, 1.0)


def latent_trajectory(sentence: str, targets: np.ndarray, spec: SynthSpec,
                      rng: np.random.Generator) -> np.ndarray:
    """Piecewise-constant character targets smoothed by a moving average; [6 x N]"""
    per_ms = spec.eeg_rate_hz / 1000.0
    low, high = spec.dwell_ms
    pad = int(round(spec.pad_ms * per_ms))
    rest = targets[spec.characters.index(" ")] if " " in spec.characters else np.zeros(N_LATENTS)
    pieces = [np.repeat(rest[:, np.newaxis], pad, axis=1)]
    for ch in sentence:
        dwell = int(round(rng.integers(low, high + 1) * per_ms))
        pieces.append(np.repeat(targets[spec.characters.index(ch)][:, np.newaxis], dwell, axis=1))
    pieces.append(np.repeat(rest[:, np.newaxis], pad, axis=1))
    raw = np.concatenate(pieces, axis=1)
    width = max(1, int(round(spec.smoothing_ms * per_ms)))
    return uniform_filter1d(raw, size=width, axis=1, mode="nearest")


def synthesize_speech(latents: np.ndarray, spec: SynthSpec) -> np.ndarray:
    """Five-harmonic tone; pitch, loudness and harmonic balance follow the latents"""
    n = latents.shape[1]
    duration = n / spec.eeg_rate_hz
    m = int(round(duration * spec.speech_rate_hz))
    t_latent = np.arange(n) / spec.eeg_rate_hz
    t_speech = np.arange(m) / spec.speech_rate_hz
    lat = np.vstack([np.interp(t_speech, t_latent, row) for row in latents])

    f0 = 120.0 + 30.0 * lat[0]
    phase = 2.0 * np.pi * np.cumsum(f0) / spec.speech_rate_hz
    loudness = 0.5 * (1.0 + np.tanh(lat[1]))
    wave = np.zeros(m)
    for k in range(1, 6):
        weight = np.exp(0.8 * lat[1 + (k % (N_LATENTS - 1))])
        wave += weight * np.sin(k * phase) / k
    return (0.3 * loudness * wave)[np.newaxis, :]


def frame_latents(latents: np.ndarray, spec: SynthSpec, n_frames: int,
                  window_ms: float = 25.0, hop_ms: float = 10.0) -> np.ndarray:
    """Latent means over analysis windows aligned with the MFCC frames; [T x 6]"""
    per_ms = spec.eeg_rate_hz / 1000.0
    window = max(1, int(round(window_ms * per_ms)))
    hop = int(round(hop_ms * per_ms))
    frames = np.empty((n_frames, latents.shape[0]))
    for j in range(n_frames):
        frames[j] = latents[:, j * hop:j * hop + window].mean(axis=1)
    return frames


def synthesize_utterance(sentence: str, spec: SynthSpec, seed: int, index: int,
                         targets: np.ndarray = None, mixing: np.ndarray = None) -> SynthUtterance:
    """One utterance; `index` selects an independent random stream"""
    targets = character_targets(spec, seed) if targets is None else targets
    mixing = mixing_matrix(spec, seed) if mixing is None else mixing
    rng = make_rng(seed, 12, index)

    latents = latent_trajectory(sentence, targets, spec, rng)
    clean = mixing @ latents
    snr_db = spec.effective_snr_db
    if np.isinf(snr_db):
        eeg = clean
    else:
        signal_power = np.mean(clean ** 2, axis=1, keepdims=True)
        noise = pink_noise(rng, clean.shape, spec.eeg_rate_hz)
        eeg = clean + noise * np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))

    speech = synthesize_speech(latents, spec)
    # MFCC frame count for a 25 ms window and 10 ms hop
    window = int(round(0.025 * spec.speech_rate_hz))
    hop = int(round(0.010 * spec.speech_rate_hz))
    n_frames = max(0, (speech.shape[1] - window) // hop + 1)
    artic = frame_latents(latents, spec, n_frames)
    return SynthUtterance(latents, eeg, speech, artic)


def utterance_id(subject: int, repetition: int, sentence_index: int) -> str:
    return f"s{subject + 1:02d}_r{repetition + 1}_{sentence_index + 1:03d}"


def synth_dataset(spec: SynthSpec, seed: int, root) -> List[UtteranceRecord]:
    """
    Write every utterance under root (eeg/, speech/, artic/) plus
    manifest.tsv and channels.txt; returns the manifest records
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    targets = character_targets(spec, seed)
    mixing = mixing_matrix(spec, seed)

    records = []
    index = 0
    for subject in range(spec.subjects):
        for repetition in range(spec.repetitions):
            for s, sentence in enumerate(spec.sentences):
                utt_id = utterance_id(subject, repetition, s)
                utt = synthesize_utterance(sentence, spec, seed, index, targets, mixing)
                write_matrix(root / "eeg" / f"{utt_id}.ndx", utt.eeg)
                write_matrix(root / "speech" / f"{utt_id}.ndx", utt.speech)
                write_matrix(root / "artic" / f"{utt_id}.ndx", utt.artic)
                records.append(UtteranceRecord(
                    id=utt_id,
                    subject=f"S{subject + 1:02d}",
                    session=repetition + 1,
                    transcript=sentence,
                    eeg_path=f"eeg/{utt_id}.ndx",
                    speech_path=f"speech/{utt_id}.ndx",
                    artic_path=f"artic/{utt_id}.ndx",
                ))
                index += 1

    write_manifest(root / "manifest.tsv", records)
    (root / "channels.txt").write_text("".join(f"{label}\n" for label in SCALP_CHANNELS), encoding="utf-8")
    logger.info("Synthesized %d utterances (%s condition, SNR %s dB) into %s",
                len(records), spec.condition, spec.effective_snr_db, root)
    return records

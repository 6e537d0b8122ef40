"""Synthetic corpus generation"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from errors import ParameterError  # noqa: E402
from features import extract_mfcc  # noqa: E402
from manifest import read_manifest  # noqa: E402
from recording import RawRecording  # noqa: E402
from storage import read_matrix  # noqa: E402
from synth import SynthSpec, mixing_matrix, synth_dataset, synthesize_utterance  # noqa: E402
from utils import SCALP_CHANNELS  # noqa: E402


def test_full_corpus_size():
    assert SynthSpec().n_utterances == 630


def test_noise_free_eeg_is_linear_in_latents():
    spec = SynthSpec(snr_db=float("inf"))
    utt = synthesize_utterance("the cat sat", spec, seed=0, index=0)
    mixing = mixing_matrix(spec, 0)
    coeffs, *_ = np.linalg.lstsq(mixing, utt.eeg, rcond=None)
    residual = np.linalg.norm(mixing @ coeffs - utt.eeg) / np.linalg.norm(utt.eeg)
    assert residual < 1e-10


def test_noise_power_matches_snr():
    spec = SynthSpec(snr_db=5.0)
    utt = synthesize_utterance("a red sun", spec, seed=1, index=3)
    clean = mixing_matrix(spec, 1) @ utt.latents
    ratio = np.mean(clean ** 2, axis=1) / np.mean((utt.eeg - clean) ** 2, axis=1)
    np.testing.assert_allclose(10 * np.log10(ratio), 5.0, rtol=1e-9)


def test_condition_sets_snr():
    assert SynthSpec(condition="noisy").effective_snr_db == 5.0
    assert SynthSpec(condition="clean").effective_snr_db == 20.0
    assert SynthSpec(condition="clean", snr_db=3.0).effective_snr_db == 3.0


def test_articulatory_frames_align_with_mfcc():
    spec = SynthSpec()
    utt = synthesize_utterance("we can go", spec, seed=2, index=0)
    mfcc = extract_mfcc(RawRecording(utt.speech, spec.speech_rate_hz, ["speech"]))
    assert utt.artic.shape == (mfcc.n_frames, 6)
    assert utt.eeg.shape == (len(SCALP_CHANNELS), utt.latents.shape[1])


def test_deterministic_streams():
    spec = SynthSpec()
    a = synthesize_utterance("it is cold", spec, seed=4, index=2)
    b = synthesize_utterance("it is cold", spec, seed=4, index=2)
    c = synthesize_utterance("it is cold", spec, seed=4, index=3)
    assert np.array_equal(a.eeg, b.eeg)
    assert not np.array_equal(a.eeg, c.eeg)


def test_dataset_on_disk(tmp_path):
    spec = SynthSpec(sentences=["the cat sat", "a red sun"], subjects=2, repetitions=1)
    records = synth_dataset(spec, seed=0, root=tmp_path)
    assert [r.id for r in records] == ["s01_r1_001", "s01_r1_002", "s02_r1_001", "s02_r1_002"]
    assert read_manifest(tmp_path / "manifest.tsv") == records
    assert (tmp_path / "channels.txt").read_text().split() == SCALP_CHANNELS
    eeg = read_matrix(tmp_path / records[0].eeg_path)
    assert eeg.shape[0] == 31
    assert read_matrix(tmp_path / records[0].artic_path).shape[1] == 6


@pytest.mark.parametrize("kwargs", [
    {"condition": "foggy"},
    {"sentences": ["Hello"]},
    {"subjects": 0},
    {"channels": 32},
    {"dwell_ms": (0, 10)},
])
def test_invalid_specs(kwargs):
    with pytest.raises(ParameterError):
        SynthSpec(**kwargs)

"""
Utility functions for EEGScribe
"""
import re
from typing import List, Sequence

import numpy as np

# Lowercase letters, space and apostrophe; the CTC blank is appended after these
DEFAULT_CHARACTERS = "abcdefghijklmnopqrstuvwxyz '"

# 32-electrode 10-20 cap minus FC6 (ground position)
SCALP_CHANNELS = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
    "FT9", "FC5", "FC1", "FC2", "FT10",
    "T7", "C3", "Cz", "C4", "T8",
    "TP9", "CP5", "CP1", "CP2", "CP6", "TP10",
    "P7", "P3", "Pz", "P4", "P8",
    "O1", "Oz", "O2",
]

TEMPORAL_CHANNELS = ["T7", "T8", "TP9", "TP10"]
FRONTAL_CHANNELS = ["F3", "F4", "F7", "F8", "FC1", "FC2", "FC5",
                    "Fp1", "Fp2", "FT9", "FT10", "Fz"]

CHANNEL_PRESETS = {
    "all": SCALP_CHANNELS,
    "temporal": TEMPORAL_CHANNELS,
    "frontal": FRONTAL_CHANNELS,
    "temporal+frontal": TEMPORAL_CHANNELS + FRONTAL_CHANNELS,
}

# Feature dimensions reported for the frontal and combined subsets
REPORTED_SUBSET_DIMENSIONS = {"frontal": 65, "temporal+frontal": 85, "temporal": 20}

ARTICULATORY_NAMES = ["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD"]


def find_foreign_characters(text: str, characters: str = DEFAULT_CHARACTERS) -> List[str]:
    """Return the distinct characters of text that are outside the alphabet"""
    seen = []
    for ch in text:
        if ch not in characters and ch not in seen:
            seen.append(ch)
    return seen


def validate_utterance_id(utt_id: str) -> bool:
    """Utterance ids are tokens of letters, digits, dash, dot and underscore"""
    if not utt_id:
        return False
    return bool(re.match(r'^[A-Za-z0-9._-]+$', utt_id))


def resolve_channels(spec: str) -> List[str]:
    """
    Resolve a channel subset spec: a preset name ('temporal', 'frontal',
    'temporal+frontal', 'all') or a comma-separated label list
    """
    spec = spec.strip()
    if spec in CHANNEL_PRESETS:
        return list(CHANNEL_PRESETS[spec])
    return [label.strip() for label in spec.split(",") if label.strip()]


def calculate_quality_score(total_checks: int, passed_checks: int) -> float:
    """Calculate quality score percentage"""
    if total_checks == 0:
        return 0.0
    return round((passed_checks / total_checks) * 100, 2)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded generator; extra integers select independent sub-streams"""
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Glorot-uniform matrix of shape [fan_out x fan_in]"""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def word_tokens(sentence: str) -> List[str]:
    """Whitespace tokenization with case folding"""
    return sentence.lower().split()


def unique_in_order(items: Sequence[str]) -> List[str]:
    """Distinct items in order of first appearance"""
    seen = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out

"""
Connectionist temporal classification

Loss and logit gradient via forward-backward in log space, greedy decoding,
and prefix beam search with optional character language-model fusion.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from errors import ParameterError
from utils import DEFAULT_CHARACTERS

logger = logging.getLogger(__name__)

NEG_INF = -np.inf
ROW_TOLERANCE = 1e-9
DEFAULT_BEAM_WIDTH = 25
DEFAULT_LM_WEIGHT = 1.0


@dataclass(frozen=True)
class Alphabet:
    """Output characters; the blank takes the index after the last character"""
    characters: str = DEFAULT_CHARACTERS

    def __post_init__(self):
        if not self.characters:
            raise ParameterError("Alphabet needs at least one character")
        if len(set(self.characters)) != len(self.characters):
            raise ParameterError(f"Alphabet characters must be unique: {self.characters!r}")

    @property
    def blank_index(self) -> int:
        return len(self.characters)

    @property
    def size(self) -> int:
        """Characters plus blank"""
        return len(self.characters) + 1

    def index(self, ch: str) -> int:
        i = self.characters.find(ch)
        if i < 0 or len(ch) != 1:
            raise ParameterError(f"Character {ch!r} is not in the alphabet")
        return i

    def encode(self, text: str) -> List[int]:
        return [self.index(ch) for ch in text]


class CtcResult(NamedTuple):
    """loss is +inf and feasible False when the label cannot fit in T frames"""
    loss: float
    grad: np.ndarray
    feasible: bool


@dataclass
class BeamHypothesis:
    prefix: str
    log_p_blank: float
    log_p_nonblank: float
    lm_log_score: float = 0.0

    @property
    def log_p_total(self) -> float:
        return float(np.logaddexp(self.log_p_blank, self.log_p_nonblank))

    @property
    def score(self) -> float:
        return self.log_p_total + self.lm_log_score


def collapse(path: Sequence[int], alphabet: Alphabet) -> str:
    """Merge adjacent repeats, then drop blanks"""
    out = []
    previous = None
    for idx in path:
        idx = int(idx)
        if not 0 <= idx <= alphabet.blank_index:
            raise ParameterError(f"Path index {idx} outside [0, {alphabet.blank_index}]")
        if idx != previous and idx != alphabet.blank_index:
            out.append(alphabet.characters[idx])
        previous = idx
    return "".join(out)


def required_frames(label: str) -> int:
    """Minimum path length for a label: one frame per character plus a blank between repeats"""
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def _check_log_probs(log_probs: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.ndim != 2 or log_probs.shape[1] != alphabet.size:
        raise ParameterError(
            f"log_probs must be [T x {alphabet.size}], got shape {log_probs.shape}"
        )
    row_mass = logsumexp(log_probs, axis=1)
    if np.any(np.abs(row_mass) > ROW_TOLERANCE):
        worst = int(np.argmax(np.abs(row_mass)))
        raise ParameterError(f"Row {worst} of log_probs is not normalized (logsumexp {row_mass[worst]:.3e})")
    return log_probs


def _expand(label: str, alphabet: Alphabet) -> Tuple[np.ndarray, np.ndarray]:
    """Blank-interleaved label and the positions that may skip the preceding blank"""
    ext = [alphabet.blank_index]
    for i in alphabet.encode(label):
        ext += [i, alphabet.blank_index]
    ext = np.array(ext, dtype=int)
    skip = np.zeros(ext.size, dtype=bool)
    skip[2:] = (ext[2:] != alphabet.blank_index) & (ext[2:] != ext[:-2])
    return ext, skip


def ctc_forward_backward(log_probs: np.ndarray, ext: np.ndarray, skip: np.ndarray):
    """
    Log-space alpha/beta over the expanded label

    alpha[t, s] includes the emission at t; beta[t, s] covers frames after t.
    """
    T = log_probs.shape[0]
    S = ext.size
    emit = log_probs[:, ext]

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        a = prev.copy()
        a[1:] = np.logaddexp(a[1:], prev[:-1])
        a[2:] = np.where(skip[2:], np.logaddexp(a[2:], prev[:-2]), a[2:])
        alpha[t] = a + emit[t]

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        b = nxt.copy()
        b[:-1] = np.logaddexp(b[:-1], nxt[1:])
        b[:-2] = np.where(skip[2:], np.logaddexp(b[:-2], nxt[2:]), b[:-2])
        beta[t] = b

    log_p = alpha[T - 1, S - 1]
    if S > 1:
        log_p = np.logaddexp(log_p, alpha[T - 1, S - 2])
    return alpha, beta, float(log_p)


def ctc_loss(log_probs: np.ndarray, label: str, alphabet: Alphabet) -> CtcResult:
    """
    Negative log of the total probability of all paths collapsing to label

    grad is taken with respect to the pre-softmax logits: p_t(k) minus the
    posterior occupancy of symbol k at frame t. Rows of grad sum to zero.
    """
    log_probs = _check_log_probs(log_probs, alphabet)
    T = log_probs.shape[0]
    if T == 0:
        raise ParameterError("CTC needs at least one frame")
    ext, skip = _expand(label, alphabet)

    if required_frames(label) > T:
        return CtcResult(float("inf"), np.zeros_like(log_probs), False)

    alpha, beta, log_p = ctc_forward_backward(log_probs, ext, skip)
    if not np.isfinite(log_p):
        # Feasible length, but every admissible path has zero probability
        return CtcResult(float("inf"), np.zeros_like(log_probs), True)

    occupancy = np.exp(alpha + beta - log_p)
    posterior = np.zeros_like(log_probs)
    np.add.at(posterior.T, ext, occupancy.T)
    grad = np.exp(log_probs) - posterior
    return CtcResult(-log_p, grad, True)


def greedy_decode(log_probs: np.ndarray, alphabet: Alphabet) -> str:
    """Collapse of the per-frame argmax; ties go to the lowest index"""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.ndim != 2 or log_probs.shape[1] != alphabet.size:
        raise ParameterError(f"log_probs must be [T x {alphabet.size}], got shape {log_probs.shape}")
    return collapse(np.argmax(log_probs, axis=1), alphabet)


def beam_search(log_probs: np.ndarray, alphabet: Alphabet, beam_width: int = DEFAULT_BEAM_WIDTH,
                lm=None, lm_weight: Optional[float] = None) -> List[BeamHypothesis]:
    """
    Prefix beam search; returns the surviving hypotheses best first

    Each prefix keeps the log mass of paths ending in blank and in a
    character. Extending a prefix by c adds lm_weight * log P_lm(c | prefix)
    to its fused score (lm_weight defaults to 1.0 with an LM, 0 without).
    Ranking uses total CTC mass plus the fused score,
    ties broken lexicographically on the prefix.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.ndim != 2 or log_probs.shape[1] != alphabet.size:
        raise ParameterError(f"log_probs must be [T x {alphabet.size}], got shape {log_probs.shape}")
    if lm_weight is None:
        lm_weight = DEFAULT_LM_WEIGHT if lm is not None else 0.0
    if beam_width < 1:
        raise ParameterError(f"beam_width must be >= 1, got {beam_width}")
    if lm_weight < 0:
        raise ParameterError(f"lm_weight must be >= 0, got {lm_weight}")
    if lm_weight > 0 and lm is None:
        raise ParameterError("lm_weight > 0 requires a language model")
    use_lm = lm is not None and lm_weight > 0

    blank = alphabet.blank_index
    chars = alphabet.characters
    lm_cache: Dict[str, float] = {"": 0.0}

    def fused(prefix: str) -> float:
        if prefix not in lm_cache:
            parent = fused(prefix[:-1])
            step = lm_weight * lm.next_char_logprob(prefix[:-1], prefix[-1]) if use_lm else 0.0
            lm_cache[prefix] = parent + step
        return lm_cache[prefix]

    beams: Dict[str, List[float]] = {"": [0.0, NEG_INF]}
    for t in range(log_probs.shape[0]):
        row = log_probs[t]
        candidates: Dict[str, List[float]] = {}

        def slot(prefix):
            entry = candidates.get(prefix)
            if entry is None:
                entry = candidates[prefix] = [NEG_INF, NEG_INF]
            return entry

        for prefix, (pb, pnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            entry = slot(prefix)
            entry[0] = np.logaddexp(entry[0], total + row[blank])
            if prefix:
                last = alphabet.index(prefix[-1])
                entry[1] = np.logaddexp(entry[1], pnb + row[last])
            for k, ch in enumerate(chars):
                if row[k] == NEG_INF:
                    continue
                mass = (pb if prefix and ch == prefix[-1] else total) + row[k]
                ext = slot(prefix + ch)
                ext[1] = np.logaddexp(ext[1], mass)

        ranked = []
        for prefix, (pb, pnb) in candidates.items():
            score = np.logaddexp(pb, pnb) + fused(prefix)
            if score > NEG_INF:
                ranked.append((-score, prefix))
        ranked.sort()
        beams = {prefix: candidates[prefix] for _, prefix in ranked[:beam_width]}
        if not beams:
            logger.warning("Beam search lost every hypothesis at frame %d", t)
            return [BeamHypothesis("", NEG_INF, NEG_INF, 0.0)]

    hypotheses = [BeamHypothesis(prefix, float(pb), float(pnb), fused(prefix))
                  for prefix, (pb, pnb) in beams.items()]
    hypotheses.sort(key=lambda h: (-h.score, h.prefix))
    return hypotheses


def beam_search_decode(log_probs: np.ndarray, alphabet: Alphabet, beam_width: int = DEFAULT_BEAM_WIDTH,
                       lm=None, lm_weight: Optional[float] = None) -> str:
    """Top-ranked prefix of beam_search"""
    return beam_search(log_probs, alphabet, beam_width, lm, lm_weight)[0].prefix

"""
Evaluation metrics: edit distance, word error rate, RMSE and normalized RMSE
"""
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from errors import ParameterError, UndefinedMetricError
from utils import word_tokens

logger = logging.getLogger(__name__)

Tokens = Union[str, Sequence[str]]


def _tokens(value: Tokens) -> List[str]:
    return word_tokens(value) if isinstance(value, str) else list(value)


def edit_distance(ref: Tokens, hyp: Tokens) -> int:
    """Levenshtein distance with unit costs; strings are split on whitespace"""
    ref, hyp = _tokens(ref), _tokens(hyp)
    previous = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        current = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            current[j] = min(previous[j] + 1,
                             current[j - 1] + 1,
                             previous[j - 1] + (r != h))
        previous = current
    return previous[-1]


def wer(refs: Sequence[str], hyps: Sequence[str]) -> float:
    """Corpus WER in percent: pooled edit operations over pooled reference words"""
    if len(refs) != len(hyps):
        raise ParameterError(f"{len(refs)} references but {len(hyps)} hypotheses")
    edits = sum(edit_distance(r, h) for r, h in zip(refs, hyps))
    words = sum(len(word_tokens(r)) for r in refs)
    if words == 0:
        raise UndefinedMetricError("WER is undefined for references with no words")
    return 100.0 * edits / words


class DimensionScores(NamedTuple):
    per_dimension: np.ndarray
    mean: float


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, np.newaxis]
    if truth.ndim == 1:
        truth = truth[:, np.newaxis]
    if pred.shape != truth.shape:
        raise ParameterError(f"Prediction shape {pred.shape} does not match truth shape {truth.shape}")
    if pred.shape[0] == 0:
        raise UndefinedMetricError("RMSE is undefined for zero frames")
    return pred, truth


def rmse(pred, truth) -> DimensionScores:
    """Per-dimension root mean squared error over frames, and its mean over dimensions"""
    pred, truth = _check_pair(pred, truth)
    per_dim = np.sqrt(np.mean((pred - truth) ** 2, axis=0))
    return DimensionScores(per_dim, float(per_dim.mean()))


def nrmse(pred, truth, names: Optional[Sequence[str]] = None) -> DimensionScores:
    """RMSE divided by the range (max - min) of the truth, per dimension"""
    pred, truth = _check_pair(pred, truth)
    spread = truth.max(axis=0) - truth.min(axis=0)
    flat = np.nonzero(spread <= 0)[0]
    if flat.size:
        d = int(flat[0])
        label = names[d] if names is not None else str(d)
        raise UndefinedMetricError(f"NRMSE is undefined: truth dimension {label} is constant")
    per_dim = rmse(pred, truth).per_dimension / spread
    return DimensionScores(per_dim, float(per_dim.mean()))


@dataclass
class EvalReport:
    """Per-utterance and corpus-level recognition results"""
    utterance_ids: List[str]
    references: List[str]
    hypotheses: List[str]
    per_utterance_wer: List[float]
    corpus_wer: float
    total_edits: int
    total_reference_words: int
    rmse: Optional[DimensionScores] = None
    nrmse: Optional[DimensionScores] = None
    corpus_wer_no_lm: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def n_utterances(self) -> int:
        return len(self.utterance_ids)


def evaluate_transcripts(ids: Sequence[str], refs: Sequence[str], hyps: Sequence[str]) -> EvalReport:
    if not len(ids) == len(refs) == len(hyps):
        raise ParameterError("ids, references and hypotheses must have equal length")
    per_utt = []
    edits = 0
    words = 0
    for r, h in zip(refs, hyps):
        e = edit_distance(r, h)
        n = len(word_tokens(r))
        per_utt.append(100.0 * e / n if n else float("nan"))
        edits += e
        words += n
    if words == 0:
        raise UndefinedMetricError("WER is undefined for references with no words")
    report = EvalReport(list(ids), list(refs), list(hyps), per_utt,
                        100.0 * edits / words, edits, words)
    logger.debug("Scored %d utterances: WER %.2f%%", report.n_utterances, report.corpus_wer)
    return report

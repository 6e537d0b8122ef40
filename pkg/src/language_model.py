"""
Character n-gram language model with add-k smoothing

Conditionals use the longest context suffix seen in training (up to
order - 1 symbols) and back off to shorter ones otherwise. Sentences are
padded with order - 1 begin sentinels and one end sentinel.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np

from errors import FormatError, MissingArtifactError, ParameterError
from utils import DEFAULT_CHARACTERS, find_foreign_characters

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
FILE_MAGIC = "# eegscribe char-ngram"
FILE_VERSION = 1

Context = Tuple[str, ...]


@dataclass(eq=False)
class CharNGramModel:
    order: int
    k: float
    characters: str
    counts: Dict[Context, Counter] = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise ParameterError(f"LM order must be >= 1, got {self.order}")
        if not self.k > 0:
            raise ParameterError(f"Smoothing constant k must be positive, got {self.k}")

    @property
    def vocabulary(self) -> List[str]:
        """Predictable symbols: alphabet characters and the end sentinel"""
        return list(self.characters) + [EOS]

    def _history(self, context: str) -> Context:
        for ch in context:
            if ch not in self.characters:
                raise ParameterError(f"Context character {ch!r} is not in the LM vocabulary")
        padded = [BOS] * (self.order - 1) + list(context)
        return tuple(padded[len(padded) - (self.order - 1):]) if self.order > 1 else ()

    def backoff_context(self, context: str) -> Context:
        """Longest observed suffix of the padded context"""
        history = self._history(context)
        for n in range(len(history), -1, -1):
            ctx = history[len(history) - n:]
            if ctx in self.counts:
                return ctx
        return ()

    def next_char_logprob(self, context: str, c: str) -> float:
        if c != EOS and (len(c) != 1 or c not in self.characters):
            raise ParameterError(f"Symbol {c!r} is not in the LM vocabulary")
        ctx = self.backoff_context(context)
        row = self.counts.get(ctx, Counter())
        total = sum(row.values())
        n_symbols = len(self.characters) + 1
        return float(np.log((row.get(c, 0) + self.k) / (total + self.k * n_symbols)))

    def sequence_logprob(self, s: str) -> float:
        """Chain-rule log probability including the end transition"""
        score = 0.0
        for i, ch in enumerate(s):
            score += self.next_char_logprob(s[:i], ch)
        return score + self.next_char_logprob(s, EOS)


def train_ngram(corpus: Iterable[str], order: int = 4, k: float = 1.0,
                characters: str = DEFAULT_CHARACTERS) -> CharNGramModel:
    """Count every n-gram up to order over the sentinel-padded sentences"""
    sentences = list(corpus)
    if not sentences:
        raise ParameterError("Cannot train a language model on an empty corpus")
    model = CharNGramModel(order=order, k=k, characters=characters)
    for sentence in sentences:
        foreign = find_foreign_characters(sentence, characters)
        if foreign:
            raise ParameterError(f"Character {foreign[0]!r} in {sentence!r} is outside the LM alphabet")
        padded = [BOS] * (order - 1) + list(sentence) + [EOS]
        for i in range(order - 1, len(padded)):
            target = padded[i]
            for n in range(order):
                ctx = tuple(padded[i - n:i])
                model.counts.setdefault(ctx, Counter())[target] += 1
    logger.info("Trained %d-gram character LM on %d sentences (%d contexts)",
                order, len(sentences), len(model.counts))
    return model


def dumps_lm(model: CharNGramModel) -> str:
    """
    Text form: header lines, one tab-separated n-gram count per line,
    closing line with the number of n-gram lines
    """
    lines = [
        FILE_MAGIC,
        f"version\t{FILE_VERSION}",
        f"order\t{model.order}",
        f"k\t{model.k!r}",
        f"characters\t{json.dumps(model.characters)}",
    ]
    n_entries = 0
    for ctx in sorted(model.counts, key=lambda c: (len(c), c)):
        row = model.counts[ctx]
        for symbol in sorted(row):
            lines.append(f"ngram\t{json.dumps(list(ctx))}\t{json.dumps(symbol)}\t{row[symbol]}")
            n_entries += 1
    lines.append(f"end\t{n_entries}")
    return "\n".join(lines) + "\n"


def loads_lm(text: Union[str, bytes], path: str = None) -> CharNGramModel:
    data = text.encode("utf-8") if isinstance(text, str) else text
    offset = 0
    header: Dict[str, str] = {}
    counts: Dict[Context, Counter] = {}
    n_entries = 0
    finished = False

    def fail(message, at):
        raise FormatError(message, path=path, offset=at)

    for raw in data.splitlines(keepends=True):
        try:
            line = raw.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError as exc:
            fail(f"Invalid UTF-8: {exc.reason}", offset + exc.start)
        if finished:
            if line.strip():
                fail("Content after end line", offset)
        elif offset == 0:
            if line != FILE_MAGIC:
                fail("Not a character n-gram file", offset)
        else:
            fields = line.split("\t")
            tag = fields[0]
            try:
                if tag in ("version", "order", "k", "characters") and len(fields) == 2:
                    header[tag] = fields[1]
                    if tag == "version" and int(fields[1]) != FILE_VERSION:
                        fail(f"Unsupported LM file version {fields[1]} (expected {FILE_VERSION})", offset)
                elif tag == "ngram" and len(fields) == 4:
                    ctx = tuple(json.loads(fields[1]))
                    symbol = json.loads(fields[2])
                    counts.setdefault(ctx, Counter())[symbol] = int(fields[3])
                    n_entries += 1
                elif tag == "end" and len(fields) == 2:
                    if int(fields[1]) != n_entries:
                        fail(f"End line announces {fields[1]} n-grams, found {n_entries}", offset)
                    finished = True
                else:
                    fail(f"Unrecognized line {line[:40]!r}", offset)
            except (ValueError, TypeError) as exc:
                if isinstance(exc, FormatError):
                    raise
                fail(f"Malformed {tag!r} line: {exc}", offset)
        offset += len(raw)

    if not finished:
        fail("Truncated LM file (no end line)", offset)
    missing = [key for key in ("version", "order", "k", "characters") if key not in header]
    if missing:
        fail(f"Missing header fields: {', '.join(missing)}", 0)
    try:
        model = CharNGramModel(order=int(header["order"]), k=float(header["k"]),
                               characters=json.loads(header["characters"]), counts=counts)
    except (ValueError, ParameterError) as exc:
        fail(f"Invalid header: {exc}", 0)
    return model


def save_lm(model: CharNGramModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_lm(model), encoding="utf-8")
    logger.info("Saved language model to %s", path)
    return path


def load_lm(path) -> CharNGramModel:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError("language model", [str(path)])
    return loads_lm(path.read_bytes(), str(path))

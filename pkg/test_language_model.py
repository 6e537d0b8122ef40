"""Character n-gram estimation, scoring and the text file format"""
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from errors import FormatError, MissingArtifactError, ParameterError  # noqa: E402
from language_model import EOS, dumps_lm, load_lm, loads_lm, save_lm, train_ngram  # noqa: E402
from synth import DEFAULT_SENTENCES  # noqa: E402
from utils import DEFAULT_CHARACTERS  # noqa: E402


def random_strings(n, length, seed=0):
    rng = np.random.default_rng(seed)
    chars = np.array(list(DEFAULT_CHARACTERS))
    return ["".join(rng.choice(chars, size=length)) for _ in range(n)]


def distribution(model, context):
    return np.array([math.exp(model.next_char_logprob(context, c)) for c in model.vocabulary])


class TestTraining:
    def test_hand_counted_bigram(self):
        model = train_ngram(["aab"], order=2, characters="ab")
        assert math.exp(model.next_char_logprob("a", "a")) == pytest.approx(0.4)

    def test_empty_sentence_only_sentinels(self):
        model = train_ngram([""], order=2)
        assert sum(sum(row.values()) for row in model.counts.values()) == 2
        assert all(set(row) == {EOS} for row in model.counts.values())

    def test_maximum_likelihood_limit(self):
        model = train_ngram(["aaaa"], order=4, k=1e-9, characters="a")
        # context "aaa" is followed once by "a" and once by the end sentinel
        assert math.exp(model.next_char_logprob("aaa", "a")) == pytest.approx(0.5, abs=1e-6)
        assert math.exp(model.next_char_logprob("", "a")) == pytest.approx(1.0, abs=1e-6)

    def test_foreign_character_named(self):
        with pytest.raises(ParameterError, match="'!'"):
            train_ngram(["hello!"])

    def test_empty_corpus(self):
        with pytest.raises(ParameterError):
            train_ngram([])

    def test_order_independent(self):
        corpus = DEFAULT_SENTENCES[:8]
        assert dumps_lm(train_ngram(corpus)) == dumps_lm(train_ngram(list(reversed(corpus))))


class TestScoring:
    model = train_ngram(DEFAULT_SENTENCES, order=4)

    @pytest.mark.parametrize("context", ["", "th", "the ", "zzzz", "q'x"])
    def test_conditionals_normalized(self, context):
        assert distribution(self.model, context).sum() == pytest.approx(1.0, abs=1e-12)

    def test_unseen_context_backs_off_to_unigram(self):
        model = train_ngram(["ab"], order=3)
        assert model.backoff_context("zz") == ()
        row = model.counts[()]
        expected = math.log((row["a"] + 1.0) / (sum(row.values()) + 29.0))
        assert model.next_char_logprob("zz", "a") == pytest.approx(expected)

    def test_empty_string(self):
        assert self.model.sequence_logprob("") == self.model.next_char_logprob("", EOS)

    def test_chain_rule(self):
        m = self.model
        expected = m.next_char_logprob("", "a") + m.next_char_logprob("a", "b") + m.next_char_logprob("ab", EOS)
        assert m.sequence_logprob("ab") == pytest.approx(expected)

    def test_training_sentences_beat_random_strings(self):
        for sentence in DEFAULT_SENTENCES[:5]:
            noise = [self.model.sequence_logprob(s) for s in random_strings(100, len(sentence))]
            assert self.model.sequence_logprob(sentence) > np.mean(noise)

    def test_unknown_symbol(self):
        with pytest.raises(ParameterError):
            self.model.next_char_logprob("", "Q")
        with pytest.raises(ParameterError):
            self.model.next_char_logprob("Q", "a")

    def test_larger_k_moves_toward_uniform(self):
        corpus = DEFAULT_SENTENCES[:10]
        uniform = 1.0 / (len(DEFAULT_CHARACTERS) + 1)
        gaps = []
        for k in (0.01, 1.0, 100.0):
            dist = distribution(train_ngram(corpus, k=k), "the")
            gaps.append(np.max(np.abs(dist - uniform)))
        assert gaps[0] > gaps[1] > gaps[2]


class TestFileFormat:
    model = train_ngram(DEFAULT_SENTENCES[:6], order=4, k=0.5)

    def test_round_trip(self, tmp_path):
        path = save_lm(self.model, tmp_path / "lm.txt")
        loaded = load_lm(path)
        assert loaded.order == 4 and loaded.k == 0.5
        for s in random_strings(100, 12, seed=1):
            assert loaded.sequence_logprob(s) == self.model.sequence_logprob(s)

    def test_truncated(self):
        text = dumps_lm(self.model)
        truncated = "\n".join(text.splitlines()[:-3]) + "\n"
        with pytest.raises(FormatError, match="Truncated"):
            loads_lm(truncated)

    def test_version_mismatch(self):
        text = dumps_lm(self.model).replace("version\t1", "version\t2")
        with pytest.raises(FormatError, match="Unsupported LM file version 2"):
            loads_lm(text)

    def test_wrong_magic(self):
        with pytest.raises(FormatError, match="byte offset 0"):
            loads_lm("hello\n")

    def test_count_mismatch(self):
        lines = dumps_lm(self.model).splitlines()
        del lines[6]
        with pytest.raises(FormatError, match="announces"):
            loads_lm("\n".join(lines) + "\n")

    def test_save_creates_parent_directories(self, tmp_path):
        path = save_lm(self.model, tmp_path / "run" / "lm" / "lm.txt")
        assert path.is_file()
        assert load_lm(path).order == 4

    def test_invalid_utf8_reports_offset(self, tmp_path):
        text = dumps_lm(self.model).encode("utf-8")
        path = tmp_path / "lm.txt"
        path.write_bytes(text + b"\xff\xfe\n")
        with pytest.raises(FormatError, match=f"byte offset {len(text)}") as info:
            load_lm(path)
        assert info.value.offset == len(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            load_lm(tmp_path / "absent.txt")

"""Manifest parsing, writing and summaries"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import pytest  # noqa: E402

from errors import FormatError  # noqa: E402
from manifest import (  # noqa: E402
    HEADER,
    ManifestValidator,
    UtteranceRecord,
    parse_manifest,
    read_manifest,
    sentences,
    write_manifest,
)

RECORDS = [
    UtteranceRecord("s01_r1_001", "S01", 1, "the cat sat", "eeg/a.ndx", "speech/a.ndx", "artic/a.ndx"),
    UtteranceRecord("s01_r1_002", "S01", 1, "a red sun", "eeg/b.ndx"),
    UtteranceRecord("s02_r1_001", "S02", 1, "the cat sat", "eeg/c.ndx", "speech/c.ndx"),
]


def line(*fields):
    return "\t".join(fields)


class TestParse:
    def test_round_trip(self, tmp_path):
        path = write_manifest(tmp_path / "manifest.tsv", RECORDS)
        assert path.read_text(encoding="utf-8").splitlines()[0] == HEADER
        assert read_manifest(path) == RECORDS

    def test_absent_paths(self):
        text = line("u1", "S01", "2", "a red sun", "eeg/u1.ndx", "-", "-")
        record = parse_manifest(text)[0]
        assert record.session == 2
        assert record.speech_path is None and record.artic_path is None

    def test_field_count(self):
        with pytest.raises(FormatError, match="line 2"):
            parse_manifest(HEADER + "\n" + line("u1", "S01", "1", "hi", "eeg/u1.ndx"))

    def test_duplicate_id(self):
        row = line("u1", "S01", "1", "hi", "e.ndx", "-", "-")
        with pytest.raises(FormatError, match="Duplicate utterance id 'u1'"):
            parse_manifest(row + "\n" + row)

    def test_foreign_characters(self):
        with pytest.raises(FormatError, match="outside the alphabet"):
            parse_manifest(line("u1", "S01", "1", "Hello", "e.ndx", "-", "-"))

    def test_bad_session(self):
        with pytest.raises(FormatError, match="Session must be an integer"):
            parse_manifest(line("u1", "S01", "one", "hi", "e.ndx", "-", "-"))

    def test_eeg_required(self):
        with pytest.raises(FormatError, match="EEG path is required"):
            parse_manifest(line("u1", "S01", "1", "hi", "-", "-", "-"))

    def test_invalid_id(self):
        with pytest.raises(FormatError, match="Invalid utterance id"):
            parse_manifest(line("u 1", "S01", "1", "hi", "e.ndx", "-", "-"))


def test_sentences_in_first_appearance_order():
    assert sentences(RECORDS) == ["the cat sat", "a red sun"]


class TestManifestValidator:
    def test_summary(self, tmp_path):
        path = write_manifest(tmp_path / "manifest.tsv", RECORDS)
        validator = ManifestValidator()
        result = validator.load_manifest(path)
        assert result['valid'] and result['error'] is None
        assert result['record_count'] == 3
        assert result['subjects'] == {"S01": 2, "S02": 1}
        assert result['sentence_count'] == 2
        assert validator.validate_manifest_structure(result) == []
        assert "Unique sentences: 2" in validator.get_summary(result)

    def test_missing_file(self, tmp_path):
        validator = ManifestValidator()
        result = validator.load_manifest(tmp_path / "manifest.tsv")
        assert not result['valid']
        assert "not found" in result['error']
        assert validator.get_summary(result).startswith("✗")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("u1\tS01\n", encoding="utf-8")
        result = ManifestValidator().load_manifest(path)
        assert not result['valid']
        assert "line 1" in result['error']

    def test_single_subject_flagged(self, tmp_path):
        path = write_manifest(tmp_path / "manifest.tsv", RECORDS[:2])
        validator = ManifestValidator()
        issues = validator.validate_manifest_structure(validator.load_manifest(path))
        assert issues == ["Only one subject present"]

"""
Dataset manifests
One utterance per line, tab-separated: id, subject, session, transcript,
EEG path, speech path, articulatory path ("-" when absent). Paths are
relative to the manifest's directory.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from errors import FormatError
from utils import DEFAULT_CHARACTERS, find_foreign_characters, unique_in_order, validate_utterance_id

logger = logging.getLogger(__name__)

HEADER = "# id\tsubject\tsession\ttranscript\teeg\tspeech\tartic"
ABSENT = "-"
N_FIELDS = 7


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    subject: str
    session: int
    transcript: str
    eeg_path: str
    speech_path: Optional[str] = None
    artic_path: Optional[str] = None

    def to_line(self) -> str:
        fields = [self.id, self.subject, str(self.session), self.transcript, self.eeg_path,
                  self.speech_path or ABSENT, self.artic_path or ABSENT]
        return "\t".join(fields)


def parse_manifest(text: str, characters: str = DEFAULT_CHARACTERS, path: Optional[str] = None) -> List[UtteranceRecord]:
    records = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != N_FIELDS:
            raise FormatError(f"Expected {N_FIELDS} tab-separated fields, found {len(fields)}",
                              path=path, line=lineno)
        utt_id, subject, session, transcript, eeg, speech, artic = fields
        if not validate_utterance_id(utt_id):
            raise FormatError(f"Invalid utterance id {utt_id!r}", path=path, line=lineno)
        if utt_id in seen:
            raise FormatError(f"Duplicate utterance id {utt_id!r}", path=path, line=lineno)
        try:
            session_number = int(session)
        except ValueError:
            raise FormatError(f"Session must be an integer, got {session!r}", path=path, line=lineno)
        if not transcript:
            raise FormatError("Empty transcript", path=path, line=lineno)
        foreign = find_foreign_characters(transcript, characters)
        if foreign:
            raise FormatError(f"Transcript contains characters outside the alphabet: {''.join(foreign)!r}",
                              path=path, line=lineno)
        if eeg == ABSENT:
            raise FormatError("EEG path is required", path=path, line=lineno)
        seen.add(utt_id)
        records.append(UtteranceRecord(utt_id, subject, session_number, transcript, eeg,
                                       None if speech == ABSENT else speech,
                                       None if artic == ABSENT else artic))
    return records


def read_manifest(path, characters: str = DEFAULT_CHARACTERS) -> List[UtteranceRecord]:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), characters, str(path))


def write_manifest(path, records: List[UtteranceRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([HEADER] + [r.to_line() for r in records]) + "\n", encoding="utf-8")
    return path


def sentences(records: List[UtteranceRecord]) -> List[str]:
    """Distinct transcripts in order of first appearance"""
    return unique_in_order(r.transcript for r in records)


class ManifestValidator:
    """Loads a manifest and summarizes what it describes"""

    def __init__(self, characters: str = DEFAULT_CHARACTERS):
        self.characters = characters

    def load_manifest(self, file_path) -> Dict[str, Any]:
        """
        Parse a manifest without raising

        Returns:
            Dictionary with manifest metadata, the parsed records and any error
        """
        result = {
            'file_path': str(file_path),
            'file_name': Path(file_path).name,
            'valid': False,
            'error': None,
            'record_count': 0,
            'subjects': {},
            'sentence_count': 0,
            'records': [],
        }
        try:
            records = read_manifest(file_path, self.characters)
        except FileNotFoundError:
            result['error'] = f"Manifest not found: {file_path}"
            return result
        except FormatError as e:
            result['error'] = str(e)
            return result

        result['valid'] = True
        result['records'] = records
        result['record_count'] = len(records)
        for record in records:
            result['subjects'][record.subject] = result['subjects'].get(record.subject, 0) + 1
        result['sentence_count'] = len(sentences(records))
        return result

    def validate_manifest_structure(self, manifest_result: Dict[str, Any]) -> List[str]:
        """Structural issues that do not prevent parsing"""
        issues = []
        if not manifest_result['valid']:
            issues.append(f"Manifest validation failed: {manifest_result['error']}")
            return issues
        if manifest_result['record_count'] == 0:
            issues.append("Manifest is empty (no utterances)")
        if len(manifest_result['subjects']) == 1:
            issues.append("Only one subject present")
        return issues

    def get_summary(self, manifest_result: Dict[str, Any]) -> str:
        if not manifest_result['valid']:
            return f"✗ Invalid: {manifest_result['error']}"
        subjects = manifest_result['subjects']
        return "\n".join([
            f"✓ Utterances: {manifest_result['record_count']}",
            f"✓ Subjects: {len(subjects)} ({', '.join(sorted(subjects))})",
            f"✓ Unique sentences: {manifest_result['sentence_count']}",
        ])

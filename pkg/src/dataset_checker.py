"""
Dataset Quality Checker
File presence, identifier hygiene, alphabet cleanliness and split coverage
"""
from pathlib import Path
from typing import Any, Dict, List, Optional

from manifest import UtteranceRecord
from utils import (
    DEFAULT_CHARACTERS,
    calculate_quality_score,
    find_foreign_characters,
    validate_utterance_id,
)


class DatasetIssue:
    """Represents a dataset quality issue"""

    def __init__(self, severity: str, category: str, description: str,
                 utterance_id: str = None):
        self.severity = severity  # 'error', 'warning', 'info'
        self.category = category  # 'missing_file', 'identifier', 'alphabet', 'coverage'
        self.description = description
        self.utterance_id = utterance_id

    def __repr__(self):
        return f"[{self.severity.upper()}] {self.description}"

    def to_dict(self):
        return {
            'severity': self.severity,
            'category': self.category,
            'description': self.description,
            'utterance_id': self.utterance_id,
        }


class DatasetChecker:
    """Checks a manifest and its files before any stage consumes them"""

    def __init__(self, characters: str = DEFAULT_CHARACTERS):
        self.characters = characters
        self.issues = []
        self.checks_performed = 0
        self.checks_passed = 0

    def check_dataset(self, records: List[UtteranceRecord], root,
                      test_records: Optional[List[UtteranceRecord]] = None) -> Dict[str, Any]:
        """
        Run all checks over a dataset rooted at `root`

        When test_records is given, every test transcript must also occur in
        the records outside the test split (closed vocabulary).

        Returns:
            Dictionary with check results and a quality score
        """
        self.issues = []
        self.checks_performed = 0
        self.checks_passed = 0
        root = Path(root)

        if not records:
            self._add_issue('error', 'missing_file', "Dataset has no utterances")
            self.checks_performed += 1
            return self._get_results()

        seen = set()
        for record in records:
            self._check_identifier(record, seen)
            self._check_transcript(record)
            self._check_file(root, record.eeg_path, 'EEG', record.id, required=True)
            if record.speech_path:
                self._check_file(root, record.speech_path, 'speech', record.id)
            if record.artic_path:
                self._check_file(root, record.artic_path, 'articulatory', record.id)

        if test_records is not None:
            test_ids = {r.id for r in test_records}
            self._check_coverage([r for r in records if r.id not in test_ids], test_records)

        subjects = sorted({r.subject for r in records})
        self._add_issue('info', 'coverage',
                        f"{len(records)} utterances from {len(subjects)} subjects")
        return self._get_results()

    def _check_identifier(self, record: UtteranceRecord, seen: set):
        self.checks_performed += 1
        if not validate_utterance_id(record.id):
            self._add_issue('error', 'identifier', f"Invalid utterance id: {record.id!r}", record.id)
        elif record.id in seen:
            self._add_issue('error', 'identifier', f"Duplicate utterance id: {record.id}", record.id)
        else:
            self.checks_passed += 1
        seen.add(record.id)

    def _check_transcript(self, record: UtteranceRecord):
        self.checks_performed += 1
        foreign = find_foreign_characters(record.transcript, self.characters)
        if not record.transcript:
            self._add_issue('error', 'alphabet', "Empty transcript", record.id)
        elif foreign:
            self._add_issue('error', 'alphabet',
                            f"Transcript uses characters outside the alphabet: {''.join(foreign)!r}",
                            record.id)
        elif record.transcript != record.transcript.strip() or "  " in record.transcript:
            self._add_issue('warning', 'alphabet', "Transcript has irregular whitespace", record.id)
            self.checks_passed += 1
        else:
            self.checks_passed += 1

    def _check_file(self, root: Path, relative: str, what: str, utterance_id: str, required: bool = False):
        self.checks_performed += 1
        if (root / relative).is_file():
            self.checks_passed += 1
        else:
            severity = 'error' if required else 'warning'
            self._add_issue(severity, 'missing_file', f"Missing {what} file: {relative}", utterance_id)

    def _check_coverage(self, train: List[UtteranceRecord], test: List[UtteranceRecord]):
        known = {r.transcript for r in train}
        for record in test:
            self.checks_performed += 1
            if record.transcript in known:
                self.checks_passed += 1
            else:
                self._add_issue('error', 'coverage',
                                f"Test sentence never seen in training: {record.transcript!r}", record.id)

    def _add_issue(self, severity: str, category: str, description: str, utterance_id: str = None):
        self.issues.append(DatasetIssue(severity, category, description, utterance_id))

    def _get_results(self) -> Dict[str, Any]:
        errors = sum(1 for i in self.issues if i.severity == 'error')
        warnings = sum(1 for i in self.issues if i.severity == 'warning')
        infos = sum(1 for i in self.issues if i.severity == 'info')
        quality_score = calculate_quality_score(self.checks_performed, self.checks_passed)

        return {
            'quality_score': quality_score,
            'checks_performed': self.checks_performed,
            'checks_passed': self.checks_passed,
            'total_issues': len(self.issues),
            'errors': errors,
            'warnings': warnings,
            'infos': infos,
            'issues': [issue.to_dict() for issue in self.issues],
            'passed': errors == 0,
        }

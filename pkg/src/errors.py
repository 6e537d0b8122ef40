"""
Exception hierarchy for EEGScribe
"""
from typing import List, Optional


class EEGScribeError(Exception):
    """Base class for all errors raised by EEGScribe"""


class ParameterError(EEGScribeError, ValueError):
    """Invalid argument, shape mismatch or violated precondition"""


class ChannelLookupError(EEGScribeError, LookupError):
    """Requested channel label is not part of the recording"""

    def __init__(self, label: str, available: List[str]):
        self.label = label
        self.available = list(available)
        super().__init__(f"Unknown channel label: {label!r}")


class RankError(ParameterError):
    """Fewer usable kernel components than requested"""

    def __init__(self, requested: int, usable_rank: int):
        self.requested = requested
        self.usable_rank = usable_rank
        super().__init__(
            f"Requested {requested} components but the centered kernel has "
            f"usable rank {usable_rank}"
        )


class ModelStateError(EEGScribeError, RuntimeError):
    """Operation called in the wrong model state"""


class FormatError(EEGScribeError, ValueError):
    """Malformed file content"""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, offset: Optional[int] = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class UndefinedMetricError(EEGScribeError, ArithmeticError):
    """Metric is undefined for the given inputs"""


class MissingArtifactError(EEGScribeError, FileNotFoundError):
    """Required input files or checkpoints are absent"""

    def __init__(self, what: str, missing: List[str]):
        self.missing = [str(m) for m in missing]
        listing = ", ".join(self.missing[:10])
        if len(self.missing) > 10:
            listing += f" (+{len(self.missing) - 10} more)"
        super().__init__(f"Missing {what}: {listing}")

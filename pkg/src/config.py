"""
Experiment configuration
Presets, `key = value` config files and CLI overrides, resolved in that order.
"""
import dataclasses
import logging
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from errors import FormatError, ParameterError

logger = logging.getLogger(__name__)

PRESETS: Dict[str, Dict[str, Any]] = {
    # Shortened schedules for desk runs and CI
    "desk": {
        "epochs_regression": 40,
        "epochs_ctc": 30,
        "epochs_artic": 60,
        "epochs_acoustic": 30,
        "synth_sentences": 5,
    },
    "full": {
        "epochs_regression": 500,
        "epochs_ctc": 120,
        "epochs_artic": 1000,
        "epochs_acoustic": 120,
        "synth_sentences": 30,
    },
}

CONDITION_DEFAULTS = {
    "noisy": {"batchnorm": False, "tcn_dropout": 0.0},
    "clean": {"batchnorm": True, "tcn_dropout": 0.1},
}


@dataclass
class ExperimentConfig:
    seed: int = 0
    preset: str = "desk"
    condition: str = "noisy"

    # synthetic corpus
    synth_subjects: int = 7
    synth_sentences: int = 5
    synth_repetitions: int = 3
    snr_db: Optional[float] = None

    # preprocessing and features
    bandpass_low_hz: float = 0.1
    bandpass_high_hz: float = 70.0
    bandpass_order: int = 4
    notch_hz: float = 60.0
    notch_quality: float = 30.0
    mfcc_coeffs: int = 13
    channel_subset: Tuple[str, ...] = ("all",)

    # split
    split_fraction: float = 0.8
    max_split_attempts: int = 100

    # kernel PCA
    kpca_components: int = 30
    kpca_gamma: Optional[float] = None
    kpca_coef0: float = 1.0
    kpca_degree: int = 3
    kpca_max_samples: int = 1500

    # training
    epochs_regression: int = 40
    epochs_ctc: int = 30
    epochs_artic: int = 60
    epochs_acoustic: int = 30
    batch_regression: int = 1
    batch_ctc: int = 32
    batch_artic: int = 1
    batch_acoustic: int = 32
    learning_rate: float = 1e-3
    regression_dropout: float = 0.1
    gru_dropout: float = 0.1
    artic_dropout: float = 0.2
    artic_filters: int = 128
    tcn_dropout: Optional[float] = None
    batchnorm: Optional[bool] = None
    init_mode: str = "pretrained"
    variant: str = "base"
    freeze_transplanted: bool = False

    # decoding
    beam_width: int = 25
    lm_weight: float = 1.0
    use_lm: bool = True
    lm_path: Optional[str] = None
    lm_order: int = 4
    lm_k: float = 1.0
    save_posteriors: bool = False
    vocabulary_limit: int = 0
    vocabulary_sweep: Tuple[int, ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.preset not in PRESETS:
            raise ParameterError(f"Unknown preset {self.preset!r} (choose from {', '.join(PRESETS)})")
        if self.condition not in CONDITION_DEFAULTS:
            raise ParameterError(f"condition must be 'noisy' or 'clean', got {self.condition!r}")
        if not 0 < self.split_fraction < 1:
            raise ParameterError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if self.init_mode not in ("random", "pretrained"):
            raise ParameterError(f"init_mode must be 'random' or 'pretrained', got {self.init_mode!r}")
        if self.variant not in ("base", "extended"):
            raise ParameterError(f"variant must be 'base' or 'extended', got {self.variant!r}")
        positive = ["synth_subjects", "synth_sentences", "synth_repetitions", "kpca_components",
                    "kpca_degree", "kpca_max_samples", "epochs_regression", "epochs_ctc", "epochs_artic",
                    "epochs_acoustic", "batch_regression", "batch_ctc", "batch_artic", "batch_acoustic",
                    "beam_width", "lm_order", "mfcc_coeffs", "artic_filters", "max_split_attempts"]
        for name in positive:
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.learning_rate > 0 or not self.lm_k > 0:
            raise ParameterError("learning_rate and lm_k must be positive")
        if self.lm_weight < 0 or self.vocabulary_limit < 0:
            raise ParameterError("lm_weight and vocabulary_limit must be non-negative")
        for name in ("regression_dropout", "gru_dropout", "artic_dropout"):
            if not 0 <= getattr(self, name) < 1:
                raise ParameterError(f"{name} must lie in [0, 1)")
        if self.tcn_dropout is not None and not 0 <= self.tcn_dropout < 1:
            raise ParameterError("tcn_dropout must lie in [0, 1)")

    @property
    def use_batchnorm(self) -> bool:
        if self.batchnorm is not None:
            return self.batchnorm
        return CONDITION_DEFAULTS[self.condition]["batchnorm"]

    @property
    def tcn_dropout_rate(self) -> float:
        if self.tcn_dropout is not None:
            return self.tcn_dropout
        return CONDITION_DEFAULTS[self.condition]["tcn_dropout"]

    @property
    def channel_spec(self) -> str:
        return ",".join(self.channel_subset)

    def to_text(self) -> str:
        lines = [f"# resolved configuration (preset {self.preset})"]
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _field_types() -> Dict[str, Any]:
    return typing.get_type_hints(ExperimentConfig)


def parse_value(name: str, text: str) -> Any:
    """Convert text to the declared type of field `name`"""
    hints = _field_types()
    if name not in hints:
        raise KeyError(name)
    kind = hints[name]
    text = text.strip()
    args = typing.get_args(kind)
    if typing.get_origin(kind) is typing.Union and type(None) in args:
        if text.lower() == "none":
            return None
        kind = next(a for a in args if a is not type(None))
    if kind is bool:
        lowered = text.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"expected true or false, got {text!r}")
        return lowered == "true"
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if typing.get_origin(kind) is tuple:
        item = typing.get_args(kind)[0]
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(item(p) for p in parts)
    return text


def parse_config_text(text: str, path: Optional[str] = None) -> Dict[str, Any]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise FormatError(f"Expected 'key = value', got {line.strip()!r}", path=path, line=lineno)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        try:
            values[key] = parse_value(key, raw)
        except KeyError:
            raise FormatError(f"Unknown configuration key {key!r}", path=path, line=lineno)
        except (ValueError, TypeError) as exc:
            raise FormatError(f"Bad value for {key}: {exc}", path=path, line=lineno)
    return values


def load_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def resolve_config(preset: str = "desk", config_file=None,
                   overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Preset defaults < config file < explicit overrides (None values are ignored)"""
    file_values = load_config_file(config_file) if config_file else {}
    preset = (overrides or {}).get("preset") or file_values.get("preset") or preset
    if preset not in PRESETS:
        raise ParameterError(f"Unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
    values: Dict[str, Any] = {"preset": preset, **PRESETS[preset]}
    values.update(file_values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["preset"] = preset
    return ExperimentConfig(**values)


def write_resolved_config(cfg: ExperimentConfig, out_dir) -> Path:
    path = Path(out_dir) / "config.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.to_text(), encoding="utf-8")
    return path

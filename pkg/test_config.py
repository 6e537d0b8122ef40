"""Configuration presets, files and override precedence"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import pytest  # noqa: E402

from config import (  # noqa: E402
    ExperimentConfig,
    parse_config_text,
    parse_value,
    resolve_config,
    write_resolved_config,
)
from errors import FormatError, ParameterError  # noqa: E402


def test_desk_preset_defaults():
    cfg = resolve_config("desk")
    assert cfg.epochs_ctc == 30 and cfg.synth_sentences == 5
    assert cfg.beam_width == 25 and cfg.lm_order == 4 and cfg.kpca_components == 30


def test_full_preset():
    cfg = resolve_config("full")
    assert (cfg.epochs_regression, cfg.epochs_ctc, cfg.epochs_artic) == (500, 120, 1000)
    assert cfg.synth_sentences == 30


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs_ctc = 7\nbeam_width = 4  # narrow\n", encoding="utf-8")
    cfg = resolve_config("full", path, {"beam_width": 9, "seed": None})
    assert cfg.epochs_ctc == 7
    assert cfg.beam_width == 9
    assert cfg.seed == 0
    assert cfg.epochs_artic == 1000


def test_preset_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = full\n", encoding="utf-8")
    assert resolve_config("desk", path).epochs_ctc == 120


def test_unknown_preset():
    with pytest.raises(ParameterError, match="Unknown preset"):
        resolve_config("huge")


class TestParsing:
    def test_typed_values(self):
        assert parse_value("batchnorm", "true") is True
        assert parse_value("batchnorm", "none") is None
        assert parse_value("snr_db", "inf") == float("inf")
        assert parse_value("channel_subset", "temporal+frontal") == ("temporal+frontal",)
        assert parse_value("channel_subset", "T7, T8") == ("T7", "T8")
        assert parse_value("vocabulary_sweep", "3,5") == (3, 5)

    def test_unknown_key_reports_line(self):
        with pytest.raises(FormatError, match="line 2"):
            parse_config_text("seed = 1\nwidth = 3\n")

    def test_missing_equals(self):
        with pytest.raises(FormatError, match="key = value"):
            parse_config_text("seed 1\n")

    def test_bad_value(self):
        with pytest.raises(FormatError, match="Bad value for epochs_ctc"):
            parse_config_text("epochs_ctc = many\n")

    def test_written_config_reads_back(self, tmp_path):
        cfg = resolve_config("desk", overrides={"condition": "clean", "snr_db": 12.5,
                                                "vocabulary_sweep": (3, 5), "channel_subset": ("frontal",)})
        path = write_resolved_config(cfg, tmp_path)
        assert ExperimentConfig(**parse_config_text(path.read_text(encoding="utf-8"))) == cfg


class TestValidation:
    def test_condition_defaults(self):
        assert resolve_config(overrides={"condition": "clean"}).use_batchnorm is True
        assert resolve_config(overrides={"condition": "clean"}).tcn_dropout_rate == 0.1
        assert resolve_config(overrides={"condition": "noisy"}).use_batchnorm is False
        assert resolve_config(overrides={"condition": "noisy", "batchnorm": True}).use_batchnorm is True

    @pytest.mark.parametrize("changes", [
        {"condition": "dusty"},
        {"split_fraction": 1.0},
        {"init_mode": "warm"},
        {"variant": "huge"},
        {"beam_width": 0},
        {"gru_dropout": 1.0},
        {"learning_rate": 0.0},
        {"lm_weight": -1.0},
    ])
    def test_rejected(self, changes):
        with pytest.raises(ParameterError):
            ExperimentConfig(**changes)

#!/usr/bin/env python3
"""
EEGScribe - Command Line Interface
EEG-to-text recognition experiments on synthetic or recorded corpora
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import PRESETS, resolve_config, write_resolved_config
from dataset_checker import DatasetChecker
from errors import EEGScribeError, FormatError
from experiment import (
    FEATURE_KINDS,
    Workspace,
    eeg_feature_kind,
    ensure_split,
    load_records,
    run_all,
    run_decode,
    run_eval,
    run_features,
    run_kpca_fit,
    run_kpca_transform,
    run_kpca_variance_report,
    run_lm_train,
    run_preprocess,
    run_pretrain_regression,
    run_sweep,
    run_synth,
    run_train_acoustic_ctc,
    run_train_articulatory_tcn,
    run_train_ctc,
)
from manifest import ManifestValidator
from report_generator import ReportGenerator

logger = logging.getLogger("eegscribe")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# CLI destination -> ExperimentConfig field
OVERRIDES = {
    "seed": "seed",
    "condition": "condition",
    "subjects": "synth_subjects",
    "sentences": "synth_sentences",
    "repetitions": "synth_repetitions",
    "snr_db": "snr_db",
    "channels": "channel_subset",
    "components": "kpca_components",
    "order": "lm_order",
    "init": "init_mode",
    "variant": "variant",
    "batchnorm": "batchnorm",
    "freeze_transplanted": "freeze_transplanted",
    "beam": "beam_width",
    "use_lm": "use_lm",
    "lm_weight": "lm_weight",
    "save_posteriors": "save_posteriors",
    "vocab": "vocabulary_sweep",
    "vocabulary_limit": "vocabulary_limit",
}
EPOCH_FIELDS = {
    "pretrain": "epochs_regression",
    "train-artic": "epochs_artic",
    "train-acoustic": "epochs_acoustic",
    "train-ctc": "epochs_ctc",
}


def _channels(text: str):
    return tuple(part.strip() for part in text.split(",") if part.strip()) if "," in text else (text.strip(),)


def _ints(text: str):
    return tuple(int(part) for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegscribe", description=__doc__.strip().splitlines()[-1])
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", default="output", help="output directory (default: output)")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="epoch preset (default: desk)")
    parser.add_argument("--condition", choices=["noisy", "clean"], help="recording condition")
    parser.add_argument("--vocabulary-limit", dest="vocabulary_limit", type=int,
                        help="use only the first N unique sentences")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset to <out>/data")
    p.add_argument("--subjects", type=int)
    p.add_argument("--sentences", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--snr-db", dest="snr_db", type=float, help="EEG SNR in dB (inf: noise free)")

    sub.add_parser("preprocess", help="bandpass + notch filter the raw EEG")

    p = sub.add_parser("features", help="frame features")
    p.add_argument("kind", choices=list(FEATURE_KINDS) + ["all"])
    p.add_argument("--channels", type=_channels, help="temporal|frontal|temporal+frontal|all|<labels>")

    p = sub.add_parser("kpca", help="kernel PCA over EEG features")
    p.add_argument("action", choices=["fit", "transform", "variance-report"])
    p.add_argument("--components", type=int)

    p = sub.add_parser("lm-train", help="character n-gram LM from training transcripts")
    p.add_argument("--order", type=int)

    for name, help_text in (("pretrain", "EEG -> MFCC + articulatory regression"),
                            ("train-artic", "EEG -> articulatory TCN regressor"),
                            ("train-acoustic", "MFCC + articulatory -> text CTC model")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--epochs", type=int)
        p.add_argument("--channels", type=_channels)

    p = sub.add_parser("train-ctc", help="EEG -> text CTC model")
    p.add_argument("--epochs", type=int)
    p.add_argument("--init", choices=["random", "pretrained"])
    p.add_argument("--variant", choices=["base", "extended"])
    p.add_argument("--batchnorm", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--freeze-transplanted", dest="freeze_transplanted", action="store_true", default=None)
    p.add_argument("--channels", type=_channels)

    for name, help_text in (("decode", "beam-search decode a split"),
                            ("eval", "score decoded hypotheses")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", help="checkpoint name under <out>/models (default from config)")
        p.add_argument("--split", choices=["train", "test"], default="test")
        p.add_argument("--init", choices=["random", "pretrained"])
        p.add_argument("--variant", choices=["base", "extended"])
        p.add_argument("--channels", type=_channels)
        p.add_argument("--beam", type=int)
        p.add_argument("--lm", dest="lm_file", nargs="?", const="", default=None, metavar="PATH",
                       help="fuse a character LM (default: <out>/lm/lm.txt)")
        p.add_argument("--no-lm", dest="use_lm", action="store_false", default=None, help="decode without an LM")
        p.add_argument("--lm-weight", dest="lm_weight", type=float)
        if name == "decode":
            p.add_argument("--save-posteriors", dest="save_posteriors", action="store_true", default=None)

    p = sub.add_parser("sweep", help="WER by vocabulary size")
    p.add_argument("--vocab", type=_ints, help="comma-separated vocabulary sizes, e.g. 3,5")
    p.add_argument("--variant", choices=["base", "extended"])
    p.add_argument("--channels", type=_channels)

    sub.add_parser("check", help="check the dataset under <out>/data")

    p = sub.add_parser("run", help="synthesize, train and evaluate end to end")
    p.add_argument("--variant", choices=["base", "extended"])
    p.add_argument("--channels", type=_channels)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {field: getattr(args, dest) for dest, field in OVERRIDES.items() if hasattr(args, dest)}
    epochs = getattr(args, "epochs", None)
    if epochs is not None:
        overrides[EPOCH_FIELDS[args.command]] = epochs
    lm_file = getattr(args, "lm_file", None)
    if lm_file is not None:
        overrides["use_lm"] = True
        if lm_file:
            overrides["lm_path"] = lm_file
    if args.preset:
        overrides["preset"] = args.preset
    return overrides


def _banner(title: str):
    logger.info("=" * 80)
    logger.info(title)
    logger.info("=" * 80)


def cmd_check(cfg, ws: Workspace) -> int:
    validator = ManifestValidator()
    manifest = validator.load_manifest(ws.manifest_path)
    for line in validator.get_summary(manifest).splitlines():
        logger.info(line)
    for issue in validator.validate_manifest_structure(manifest):
        logger.warning(issue)
    if not manifest['valid']:
        raise FormatError(manifest['error'], path=str(ws.manifest_path))

    test_records = None
    if ws.split_path("train").is_file() and ws.split_path("test").is_file():
        _, test_records = ensure_split(cfg, ws, manifest['records'])
    results = DatasetChecker().check_dataset(manifest['records'], ws.data_dir, test_records)

    for issue in results['issues']:
        level = {'error': logging.ERROR, 'warning': logging.WARNING}.get(issue['severity'], logging.INFO)
        logger.log(level, "%s%s", f"{issue['utterance_id']}: " if issue['utterance_id'] else "", issue['description'])
    status = "✓" if results['passed'] else "✗"
    logger.info("%s Check score: %.1f%% (%d errors, %d warnings)", status, results['quality_score'],
                results['errors'], results['warnings'])
    html, _ = ReportGenerator().generate_check_reports(results, manifest, ws.reports_dir)
    logger.info("Report: %s", html)
    return 0 if results['passed'] else 1


def dispatch(args: argparse.Namespace, cfg, ws: Workspace) -> int:
    command = args.command
    if command == "synth":
        records = run_synth(cfg, ws)
        logger.info("✓ %d utterances written to %s", len(records), ws.data_dir)
    elif command == "preprocess":
        run_preprocess(cfg, ws, load_records(cfg, ws))
    elif command == "features":
        run_features(cfg, ws, load_records(cfg, ws), args.kind)
    elif command == "kpca":
        if args.action == "fit":
            train, _ = ensure_split(cfg, ws)
            run_kpca_fit(cfg, ws, train)
        elif args.action == "transform":
            run_kpca_transform(cfg, ws, load_records(cfg, ws))
        else:
            run_kpca_variance_report(cfg, ws)
    elif command == "lm-train":
        run_lm_train(cfg, ws)
    elif command == "pretrain":
        run_pretrain_regression(cfg, ws)
    elif command == "train-artic":
        result = run_train_articulatory_tcn(cfg, ws)
        for key, value in result.metrics.items():
            logger.info("%s: %.4f", key, value)
    elif command == "train-acoustic":
        run_train_acoustic_ctc(cfg, ws)
    elif command == "train-ctc":
        result = run_train_ctc(cfg, ws)
        logger.info("✓ %s saved to %s", result.name, result.checkpoint)
    elif command == "decode":
        run_decode(cfg, ws, args.model, args.split)
    elif command == "eval":
        report = run_eval(cfg, ws, args.model, args.split)
        logger.info("Corpus WER: %.2f%%", report.corpus_wer)
    elif command == "sweep":
        records = load_records(cfg.replace(vocabulary_limit=0), ws)
        if not ws.feature_path(eeg_feature_kind(cfg), records[0].id).is_file():
            run_preprocess(cfg, ws, records)
            run_features(cfg, ws, records)
        rows = run_sweep(cfg, ws)
        _banner("📊 SWEEP SUMMARY")
        for row in rows:
            logger.info("%3d sentences: WER random %.2f%%, pretrained %.2f%%", row["unique_sentences"],
                        row["wer_random"], row["wer_pretrained"])
    elif command == "check":
        return cmd_check(cfg, ws)
    elif command == "run":
        results = run_all(cfg, ws)
        _banner("📊 SUMMARY")
        logger.info("WER random init: %.2f%%", results["eval_random"].corpus_wer)
        logger.info("WER pretrained init: %.2f%%", results["eval_pretrained"].corpus_wer)
        for key, value in results["articulatory"].metrics.items():
            logger.info("%s: %.4f", key, value)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        cfg = resolve_config(args.preset or "desk", args.config, collect_overrides(args))
        ws = Workspace(Path(args.out))
        write_resolved_config(cfg, ws.root)
        _banner(f"🧠 EEGSCRIBE - {args.command.upper()}")
        return dispatch(args, cfg, ws)
    except EEGScribeError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

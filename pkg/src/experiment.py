"""
Experiment orchestration

Each stage reads its inputs from an output directory, writes its artifacts
back there and can be rerun on its own. Stage order:

    synth -> preprocess -> features (eeg, mfcc, targets) -> split
          -> kpca fit/transform -> lm-train
          -> pretrain -> train-ctc -> decode -> eval
          (train-acoustic before train-ctc for the extended variant)
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax

from config import ExperimentConfig
from ctc import Alphabet, beam_search_decode, ctc_loss, required_frames
from errors import MissingArtifactError, ParameterError
from features import concat_targets, extract_eeg_features, extract_mfcc, select_channels, select_feature_columns
from filters import preprocess_eeg
from kpca import components_for_variance, fit_kpca, transform
from language_model import CharNGramModel, load_lm, save_lm, train_ngram
from layers import mse_loss
from manifest import UtteranceRecord, read_manifest, sentences
from metrics import EvalReport, evaluate_transcripts, nrmse, rmse
from model import (
    DONOR_LAYERS,
    Model,
    build_articulatory_model,
    build_ctc_model,
    build_regression_model,
    copy_layer_weights,
    length_mask,
    transplant_gru_weights,
)
from optimizer import AdamState, adam_step
from recording import FeatureSequence, RawRecording
from report_generator import ReportGenerator
from storage import (
    load_features,
    load_kpca,
    load_model,
    read_matrix,
    save_features,
    save_kpca,
    save_model,
    write_matrix,
)
from synth import DEFAULT_SENTENCES, SynthSpec, synth_dataset
from utils import (
    ARTICULATORY_NAMES,
    DEFAULT_CHARACTERS,
    REPORTED_SUBSET_DIMENSIONS,
    SCALP_CHANNELS,
    make_rng,
    resolve_channels,
    word_tokens,
)

logger = logging.getLogger(__name__)

EEG_RATE_HZ = 1000.0
SPEECH_RATE_HZ = 16000.0
FEATURE_KINDS = ("eeg", "mfcc", "targets")
STD_FLOOR = 1e-12

# RNG stream ids per training stage
STREAM_SPLIT = 30
STREAM_REGRESSION = 40
STREAM_ARTIC = 41
STREAM_ACOUSTIC = 42
STREAM_CTC = 43


@dataclass(frozen=True)
class Workspace:
    """
    Artifact layout under one output directory

    `shared` points at a parent run whose data and split-independent
    features are reused (vocabulary sweeps); split-dependent artifacts
    always live under `root`.
    """
    root: Path
    shared: Optional[Path] = None

    @property
    def base(self) -> Path:
        return self.shared or self.root

    @property
    def data_dir(self) -> Path:
        return self.base / "data"

    @property
    def manifest_path(self) -> Path:
        return self.data_dir / "manifest.tsv"

    def filtered_path(self, utt_id: str) -> Path:
        return self.base / "filtered" / f"{utt_id}.ndx"

    def feature_path(self, kind: str, utt_id: str) -> Path:
        owner = self.root if kind == "kpca" else self.base
        return owner / "features" / kind / f"{utt_id}.ndx"

    def split_path(self, name: str) -> Path:
        return self.root / "split" / f"{name}.txt"

    @property
    def kpca_path(self) -> Path:
        return self.root / "kpca" / "kpca.ckpt"

    def model_path(self, name: str) -> Path:
        return self.root / "models" / f"{name}.ckpt"

    @property
    def lm_path(self) -> Path:
        return self.root / "lm" / "lm.txt"

    def hypotheses_path(self, name: str) -> Path:
        return self.root / "decode" / f"{name}.tsv"

    def posterior_path(self, model_name: str, utt_id: str) -> Path:
        return self.root / "posteriors" / model_name / f"{utt_id}.ndx"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"


@dataclass
class Standardizer:
    """Per-column z-scoring with statistics from training frames"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, sequences: Sequence[np.ndarray]) -> "Standardizer":
        stacked = np.concatenate(list(sequences), axis=0)
        std = stacked.std(axis=0)
        return cls(stacked.mean(axis=0), np.where(std < STD_FLOOR, 1.0, std))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def invert(self, y: np.ndarray) -> np.ndarray:
        return y * self.std + self.mean

    def to_meta(self) -> Dict[str, List[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_meta(cls, meta: Dict[str, List[float]]) -> "Standardizer":
        return cls(np.asarray(meta["mean"], dtype=np.float64), np.asarray(meta["std"], dtype=np.float64))


@dataclass
class TrainingResult:
    name: str
    losses: List[float]
    initial_loss: float
    checkpoint: Path
    skipped: int = 0
    reports: Dict[str, str] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)


def _require(paths: Sequence[Path], what: str):
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise MissingArtifactError(what, missing)


def _log_epoch(stage: str, epoch: int, epochs: int, loss: float):
    logger.debug("%s epoch %d/%d loss %.6f", stage, epoch + 1, epochs, loss)
    if (epoch + 1) % max(1, epochs // 10) == 0 or epoch + 1 == epochs:
        logger.info("%s: epoch %d/%d, loss %.6f", stage, epoch + 1, epochs, loss)


def pad_batch(sequences: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Right-pad [T_i x D] sequences into [B x T_max x D] plus the length vector"""
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    batch = np.zeros((len(sequences), int(lengths.max()), sequences[0].shape[1]))
    for b, seq in enumerate(sequences):
        batch[b, :len(seq)] = seq
    return batch, lengths


# ---------------------------------------------------------------------------
# data preparation

def run_synth(cfg: ExperimentConfig, ws: Workspace) -> List[UtteranceRecord]:
    spec = SynthSpec(
        sentences=list(DEFAULT_SENTENCES[:cfg.synth_sentences]),
        subjects=cfg.synth_subjects,
        repetitions=cfg.synth_repetitions,
        eeg_rate_hz=EEG_RATE_HZ,
        speech_rate_hz=SPEECH_RATE_HZ,
        condition=cfg.condition,
        snr_db=cfg.snr_db,
    )
    return synth_dataset(spec, cfg.seed, ws.data_dir)


def load_records(cfg: ExperimentConfig, ws: Workspace) -> List[UtteranceRecord]:
    """Manifest records, restricted to the first `vocabulary_limit` unique sentences when set"""
    if not ws.manifest_path.is_file():
        raise MissingArtifactError("dataset manifest (run `synth` first)", [str(ws.manifest_path)])
    records = read_manifest(ws.manifest_path)
    if not records:
        raise ParameterError(f"Manifest {ws.manifest_path} lists no utterances")
    if cfg.vocabulary_limit:
        available = sentences(records)
        if cfg.vocabulary_limit > len(available):
            raise ParameterError(f"vocabulary_limit {cfg.vocabulary_limit} exceeds the "
                                 f"{len(available)} unique sentences in the dataset")
        keep = set(available[:cfg.vocabulary_limit])
        records = [r for r in records if r.transcript in keep]
    return records


def channel_labels(ws: Workspace) -> List[str]:
    path = ws.data_dir / "channels.txt"
    if not path.is_file():
        return list(SCALP_CHANNELS)
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def run_preprocess(cfg: ExperimentConfig, ws: Workspace, records: List[UtteranceRecord]) -> int:
    """Bandpass + notch every raw EEG recording into filtered/"""
    _require([ws.data_dir / r.eeg_path for r in records], "raw EEG recordings")
    labels = channel_labels(ws)
    for record in records:
        raw = RawRecording(read_matrix(ws.data_dir / record.eeg_path), EEG_RATE_HZ, labels)
        filtered = preprocess_eeg(raw, cfg.bandpass_low_hz, cfg.bandpass_high_hz, cfg.bandpass_order,
                                  cfg.notch_hz, cfg.notch_quality)
        write_matrix(ws.filtered_path(record.id), filtered.samples)
    logger.info("Filtered %d recordings (%.1f-%.1f Hz bandpass, %.0f Hz notch)", len(records),
                cfg.bandpass_low_hz, cfg.bandpass_high_hz, cfg.notch_hz)
    return len(records)


def eeg_feature_kind(cfg: ExperimentConfig) -> str:
    """Feature directory for the configured channels: eeg, or eeg-<subset>"""
    if cfg.channel_subset == ("all",):
        return "eeg"
    return "eeg-" + cfg.channel_spec.replace("+", "-").replace(",", "-")


def run_features(cfg: ExperimentConfig, ws: Workspace, records: List[UtteranceRecord],
                 kind: str = "all") -> int:
    """Frame features at 100 frames/s: eeg (5 per channel), mfcc, targets (MFCC + articulatory)"""
    kinds = FEATURE_KINDS if kind == "all" else (kind,)
    for k in kinds:
        if k not in FEATURE_KINDS:
            raise ParameterError(f"Unknown feature kind {k!r} (choose from {', '.join(FEATURE_KINDS)}, all)")
        if k == "eeg":
            _require([ws.filtered_path(r.id) for r in records], "filtered EEG (run `preprocess` first)")
            labels = channel_labels(ws)
            subset = None if cfg.channel_subset == ("all",) else resolve_channels(cfg.channel_spec)
            for record in records:
                filtered = RawRecording(read_matrix(ws.filtered_path(record.id)), EEG_RATE_HZ, labels)
                if subset is not None:
                    filtered = select_channels(filtered, subset)
                save_features(ws.feature_path(eeg_feature_kind(cfg), record.id), extract_eeg_features(filtered))
        elif k == "mfcc":
            without = [r.id for r in records if not r.speech_path]
            if without:
                raise MissingArtifactError("speech recordings", without)
            _require([ws.data_dir / r.speech_path for r in records], "speech recordings")
            for record in records:
                speech = RawRecording(read_matrix(ws.data_dir / record.speech_path), SPEECH_RATE_HZ, ["speech"])
                save_features(ws.feature_path("mfcc", record.id), extract_mfcc(speech, cfg.mfcc_coeffs))
        else:
            _require([ws.feature_path("mfcc", r.id) for r in records], "MFCC features (run `features mfcc`)")
            for record in records:
                artic = FeatureSequence(load_articulatory(ws, record), 100.0, ARTICULATORY_NAMES)
                mfcc = load_features(ws.feature_path("mfcc", record.id))
                save_features(ws.feature_path("targets", record.id), concat_targets(mfcc, artic))
        logger.info("Extracted %s features for %d utterances", k, len(records))
    return len(records)


def load_articulatory(ws: Workspace, record: UtteranceRecord) -> np.ndarray:
    if not record.artic_path:
        raise MissingArtifactError("articulatory targets", [record.id])
    path = ws.data_dir / record.artic_path
    _require([path], "articulatory targets")
    return read_matrix(path)


def split_dataset(records: List[UtteranceRecord], fraction: float, seed: int,
                  max_attempts: int = 100) -> Tuple[List[UtteranceRecord], List[UtteranceRecord]]:
    """
    Seeded utterance-level split; reshuffles until every test sentence
    also occurs in the training part

    Both parts keep manifest order.
    """
    if not 0 < fraction < 1:
        raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(records)
    n_train = int(round(fraction * n))
    if n_train == 0 or n_train == n:
        raise ParameterError(f"Splitting {n} utterances at {fraction} leaves one side empty")
    for attempt in range(max_attempts):
        order = make_rng(seed, STREAM_SPLIT, attempt).permutation(n)
        train_idx = set(order[:n_train].tolist())
        train = [r for i, r in enumerate(records) if i in train_idx]
        test = [r for i, r in enumerate(records) if i not in train_idx]
        known = {r.transcript for r in train}
        if all(r.transcript in known for r in test):
            if attempt:
                logger.debug("Split needed %d reshuffles for vocabulary coverage", attempt)
            return train, test
    raise ParameterError(f"No split within {max_attempts} attempts puts every test sentence in training")


def ensure_split(cfg: ExperimentConfig, ws: Workspace,
                 records: Optional[List[UtteranceRecord]] = None) -> Tuple[List[UtteranceRecord], List[UtteranceRecord]]:
    """Read split/train.txt and split/test.txt, creating them on first use"""
    records = load_records(cfg, ws) if records is None else records
    by_id = {r.id: r for r in records}
    train_file, test_file = ws.split_path("train"), ws.split_path("test")
    if train_file.is_file() and test_file.is_file():
        parts = []
        for path in (train_file, test_file):
            ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
            unknown = [i for i in ids if i not in by_id]
            if unknown:
                raise MissingArtifactError(f"utterances listed in {path.name}", unknown)
            parts.append([by_id[i] for i in ids])
        return parts[0], parts[1]

    train, test = split_dataset(records, cfg.split_fraction, cfg.seed, cfg.max_split_attempts)
    for path, part in ((train_file, train), (test_file, test)):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{r.id}\n" for r in part), encoding="utf-8")
    logger.info("Split %d utterances into %d train / %d test", len(records), len(train), len(test))
    return train, test


# ---------------------------------------------------------------------------
# kernel PCA

def _eeg_frames(ws: Workspace, records: Sequence[UtteranceRecord]) -> List[np.ndarray]:
    paths = [ws.feature_path("eeg", r.id) for r in records]
    _require(paths, "EEG features (run `features eeg`)")
    return [load_features(p).frames for p in paths]


def run_kpca_fit(cfg: ExperimentConfig, ws: Workspace, train: List[UtteranceRecord]):
    """
    Standardize pooled training frames, fit on an evenly strided subsample
    of at most kpca_max_samples of them, and store the model with the
    standardization statistics
    """
    frames = _eeg_frames(ws, train)
    scaler = Standardizer.fit(frames)
    pooled = scaler.apply(np.concatenate(frames, axis=0))
    if len(pooled) > cfg.kpca_max_samples:
        index = np.linspace(0, len(pooled) - 1, cfg.kpca_max_samples).round().astype(int)
        pooled = pooled[index]
    model = fit_kpca(pooled, cfg.kpca_components, cfg.kpca_gamma, cfg.kpca_coef0, cfg.kpca_degree)
    save_kpca(ws.kpca_path, model, {"feature_mean": scaler.mean, "feature_std": scaler.std})
    run_kpca_variance_report(cfg, ws)
    return model


def run_kpca_transform(cfg: ExperimentConfig, ws: Workspace, records: List[UtteranceRecord]) -> int:
    _require([ws.kpca_path], "KPCA model (run `kpca fit`)")
    model, extra = load_kpca(ws.kpca_path)
    scaler = Standardizer(extra["feature_mean"], extra["feature_std"])
    names = [f"kpca{j}" for j in range(model.n_components)]
    for record, frames in zip(records, _eeg_frames(ws, records)):
        projected = transform(model, scaler.apply(frames))
        save_features(ws.feature_path("kpca", record.id), FeatureSequence(projected, 100.0, names))
    logger.info("Projected %d utterances onto %d kernel components", len(records), model.n_components)
    return len(records)


def run_kpca_variance_report(cfg: ExperimentConfig, ws: Workspace) -> Dict[str, str]:
    _require([ws.kpca_path], "KPCA model (run `kpca fit`)")
    model, _ = load_kpca(ws.kpca_path)
    paths = ReportGenerator().write_variance_report(model.eigenvalues, model.n_components, ws.reports_dir)
    logger.info("%d components keep %.1f%% of the kernel variance; 90%% needs %d",
                model.n_components,
                100.0 * float(np.sum(model.eigenvalues[:model.n_components]) / np.sum(model.eigenvalues)),
                components_for_variance(model, 0.9))
    return paths


# ---------------------------------------------------------------------------
# model inputs and targets

def subset_note(cfg: ExperimentConfig, dim: int) -> Optional[str]:
    reported = REPORTED_SUBSET_DIMENSIONS.get(cfg.channel_spec)
    if reported is None or reported == dim:
        return None
    return (f"{cfg.channel_spec} channels give {dim} feature dimensions "
            f"(5 per channel); the reference dimension for this subset is {reported}")


def model_inputs(cfg: ExperimentConfig, ws: Workspace, records: Sequence[UtteranceRecord]) -> Dict[str, np.ndarray]:
    """KPCA projections, or raw per-channel features when a channel subset is configured"""
    if cfg.channel_subset == ("all",):
        paths = [ws.feature_path("kpca", r.id) for r in records]
        _require(paths, "KPCA features (run `kpca transform`)")
        return {r.id: load_features(p).frames for r, p in zip(records, paths)}
    labels = resolve_channels(cfg.channel_spec)
    subset_paths = [ws.feature_path(eeg_feature_kind(cfg), r.id) for r in records]
    if all(p.is_file() for p in subset_paths):
        return {r.id: load_features(p).frames for r, p in zip(records, subset_paths)}
    paths = [ws.feature_path("eeg", r.id) for r in records]
    _require(paths, f"EEG features (run `features eeg --channels {cfg.channel_spec}`)")
    return {r.id: select_feature_columns(load_features(p), labels).frames for r, p in zip(records, paths)}


def acoustic_inputs(ws: Workspace, records: Sequence[UtteranceRecord]) -> Dict[str, np.ndarray]:
    paths = [ws.feature_path("targets", r.id) for r in records]
    _require(paths, "MFCC + articulatory targets (run `features targets`)")
    return {r.id: load_features(p).frames for r, p in zip(records, paths)}


def _aligned(records: Sequence[UtteranceRecord], inputs: Dict[str, np.ndarray],
             targets: Dict[str, np.ndarray]) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Trim each input/target pair to the shorter sequence"""
    xs, ys = [], []
    for record in records:
        n = min(len(inputs[record.id]), len(targets[record.id]))
        xs.append(inputs[record.id][:n])
        ys.append(targets[record.id][:n])
    return xs, ys


# ---------------------------------------------------------------------------
# training loops

def train_regression(model: Model, inputs: List[np.ndarray], targets: List[np.ndarray],
                     epochs: int, batch_size: int, learning_rate: float, seed: int, stream: int,
                     stage: str) -> Tuple[List[float], float]:
    """Masked MSE with Adam; returns per-epoch mean training loss and the pre-training loss"""
    state = AdamState(lr=learning_rate)
    order_rng = make_rng(seed, stream, 0)
    dropout_rng = make_rng(seed, stream, 1)
    initial = regression_loss(model, inputs, targets)
    losses = []
    for epoch in range(epochs):
        order = order_rng.permutation(len(inputs))
        total, frames = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            xb, lengths = pad_batch([inputs[i] for i in idx])
            yb, _ = pad_batch([targets[i] for i in idx])
            mask = length_mask(lengths, xb.shape[0], xb.shape[1])
            pred = model.forward(xb, lengths, mode="train", rng=dropout_rng)
            loss, grad = mse_loss(pred, yb, mask)
            grads, _ = model.backward(grad)
            adam_step(state, model.parameters(trainable_only=True), grads)
            count = int(mask.sum())
            total += loss * count
            frames += count
        losses.append(total / frames)
        _log_epoch(stage, epoch, epochs, losses[-1])
    return losses, initial


def regression_loss(model: Model, inputs: List[np.ndarray], targets: List[np.ndarray]) -> float:
    """Frame-weighted inference-mode MSE"""
    total, frames = 0.0, 0
    for x, y in zip(inputs, targets):
        loss, _ = mse_loss(model.forward(x, mode="infer"), y)
        total += loss * len(x)
        frames += len(x)
    return total / frames


def train_ctc(model: Model, inputs: List[np.ndarray], labels: List[str], alphabet: Alphabet,
              epochs: int, batch_size: int, learning_rate: float, seed: int, stream: int,
              stage: str) -> Tuple[List[float], int]:
    """
    CTC training on softmax logits with Adam

    Utterances whose label needs more frames than they have are dropped
    up front. Returns per-epoch mean loss per utterance and the skip count.
    """
    feasible = [i for i, (x, y) in enumerate(zip(inputs, labels)) if required_frames(y) <= len(x)]
    skipped = len(inputs) - len(feasible)
    if skipped:
        logger.warning("%s: skipping %d of %d utterances whose transcripts need more frames than they have",
                       stage, skipped, len(inputs))
    if not feasible:
        raise ParameterError(f"{stage}: no utterance is long enough for its transcript")

    state = AdamState(lr=learning_rate)
    order_rng = make_rng(seed, stream, 0)
    dropout_rng = make_rng(seed, stream, 1)
    losses = []
    for epoch in range(epochs):
        order = [feasible[i] for i in order_rng.permutation(len(feasible))]
        total, counted = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            xb, lengths = pad_batch([inputs[i] for i in idx])
            logits = model.forward(xb, lengths, mode="train", rng=dropout_rng, skip_softmax=True)
            log_probs = log_softmax(logits, axis=-1)
            grad = np.zeros_like(logits)
            batch_loss, used = 0.0, 0
            for b, i in enumerate(idx):
                result = ctc_loss(log_probs[b, :lengths[b]], labels[i], alphabet)
                if not np.isfinite(result.loss):
                    continue
                grad[b, :lengths[b]] = result.grad
                batch_loss += result.loss
                used += 1
            if not used:
                continue
            grads, _ = model.backward(grad / used)
            adam_step(state, model.parameters(trainable_only=True), grads)
            total += batch_loss
            counted += used
        losses.append(total / counted if counted else float("inf"))
        _log_epoch(stage, epoch, epochs, losses[-1])
    return losses, skipped


# ---------------------------------------------------------------------------
# training stages

def run_pretrain_regression(cfg: ExperimentConfig, ws: Workspace) -> TrainingResult:
    """EEG inputs -> 19-dim MFCC + articulatory regression (the transplant source)"""
    train, _ = ensure_split(cfg, ws)
    xs, ys = _aligned(train, model_inputs(cfg, ws, train), acoustic_inputs(ws, train))
    x_scaler, y_scaler = Standardizer.fit(xs), Standardizer.fit(ys)
    xs = [x_scaler.apply(x) for x in xs]
    ys = [y_scaler.apply(y) for y in ys]

    model = build_regression_model(xs[0].shape[1], ys[0].shape[1], cfg.seed, cfg.regression_dropout)
    losses, initial = train_regression(model, xs, ys, cfg.epochs_regression, cfg.batch_regression,
                                       cfg.learning_rate, cfg.seed, STREAM_REGRESSION, "pretrain")
    path = save_model(ws.model_path("regression"), model, {
        "channels": cfg.channel_spec, "input_scaler": x_scaler.to_meta(), "target_scaler": y_scaler.to_meta(),
    })
    reports = ReportGenerator().write_loss_curve("pretrain", losses, ws.reports_dir, ylabel="MSE")
    logger.info("Regression MSE %.4f -> %.4f over %d epochs", initial, losses[-1], len(losses))
    return TrainingResult("regression", losses, initial, path, reports=reports)


def run_train_articulatory_tcn(cfg: ExperimentConfig, ws: Workspace) -> TrainingResult:
    """EEG inputs -> 6 articulatory trajectories, scored by RMSE / NRMSE on the test split"""
    train, test = ensure_split(cfg, ws)
    artic = {r.id: load_articulatory(ws, r) for r in train + test}
    xs, ys = _aligned(train, model_inputs(cfg, ws, train), artic)
    x_scaler, y_scaler = Standardizer.fit(xs), Standardizer.fit(ys)

    model = build_articulatory_model(xs[0].shape[1], ys[0].shape[1], cfg.artic_filters,
                                     cfg.artic_dropout, cfg.seed)
    losses, initial = train_regression(model, [x_scaler.apply(x) for x in xs], [y_scaler.apply(y) for y in ys],
                                       cfg.epochs_artic, cfg.batch_artic, cfg.learning_rate,
                                       cfg.seed, STREAM_ARTIC, "train-artic")

    test_x, test_y = _aligned(test, model_inputs(cfg, ws, test), artic)
    pred = np.concatenate([y_scaler.invert(model.forward(x_scaler.apply(x), mode="infer")) for x in test_x])
    truth = np.concatenate(test_y)
    baseline = np.broadcast_to(y_scaler.mean, truth.shape)
    rmse_scores = rmse(pred, truth)
    nrmse_scores = nrmse(pred, truth, ARTICULATORY_NAMES)
    baseline_scores = nrmse(baseline, truth, ARTICULATORY_NAMES)

    path = save_model(ws.model_path("articulatory"), model, {
        "channels": cfg.channel_spec, "input_scaler": x_scaler.to_meta(), "target_scaler": y_scaler.to_meta(),
    })
    generator = ReportGenerator()
    reports = generator.write_loss_curve("train-artic", losses, ws.reports_dir, ylabel="MSE")
    reports.update(generator.generate_regression_report("articulatory", ARTICULATORY_NAMES, rmse_scores,
                                                        nrmse_scores, baseline_scores, ws.reports_dir))
    logger.info("Articulatory TCN: average RMSE %.3f, average NRMSE %.3f (mean predictor %.3f)",
                rmse_scores.mean, nrmse_scores.mean, baseline_scores.mean)
    return TrainingResult("articulatory", losses, initial, path, reports=reports, metrics={
        "average_rmse": rmse_scores.mean,
        "average_nrmse": nrmse_scores.mean,
        "baseline_average_nrmse": baseline_scores.mean,
    })


def run_train_acoustic_ctc(cfg: ExperimentConfig, ws: Workspace) -> TrainingResult:
    """CTC model over the 19-dim MFCC + articulatory features; donor of the extended variant"""
    train, _ = ensure_split(cfg, ws)
    inputs = acoustic_inputs(ws, train)
    xs = [inputs[r.id] for r in train]
    scaler = Standardizer.fit(xs)
    alphabet = Alphabet(DEFAULT_CHARACTERS)

    model = build_ctc_model(xs[0].shape[1], alphabet.size, "base", cfg.use_batchnorm, cfg.seed,
                            cfg.gru_dropout, cfg.tcn_dropout_rate)
    model.name = "acoustic"
    losses, skipped = train_ctc(model, [scaler.apply(x) for x in xs], [r.transcript for r in train], alphabet,
                                cfg.epochs_acoustic, cfg.batch_acoustic, cfg.learning_rate,
                                cfg.seed, STREAM_ACOUSTIC, "train-acoustic")
    path = save_model(ws.model_path("acoustic"), model, {
        "input_scaler": scaler.to_meta(), "characters": alphabet.characters, "inputs": "acoustic",
    })
    reports = ReportGenerator().write_loss_curve("train-acoustic", losses, ws.reports_dir, ylabel="CTC loss")
    return TrainingResult("acoustic", losses, losses[0], path, skipped=skipped, reports=reports)


def ctc_model_name(cfg: ExperimentConfig) -> str:
    name = f"ctc_{cfg.init_mode}_{cfg.variant}"
    if cfg.channel_subset != ("all",):
        name += "_" + cfg.channel_spec.replace("+", "-").replace(",", "-")
    return name


def prepare_ctc_model(cfg: ExperimentConfig, ws: Workspace, input_dim: int) -> Model:
    """
    Freshly initialized CTC model with transplanted weights applied

    pretrained: first two GRUs from the regression checkpoint (and, for the
    extended variant, the adapter from its output layer).
    extended: donor GRU pair from the acoustic checkpoint, kept frozen.
    """
    alphabet = Alphabet(DEFAULT_CHARACTERS)
    donor = None
    if cfg.variant == "extended":
        if not ws.model_path("acoustic").is_file():
            raise MissingArtifactError("acoustic CTC checkpoint (run `train-acoustic`)",
                                       [str(ws.model_path("acoustic"))])
        donor, _ = load_model(ws.model_path("acoustic"))

    model = build_ctc_model(input_dim, alphabet.size, cfg.variant, cfg.use_batchnorm, cfg.seed,
                            cfg.gru_dropout, cfg.tcn_dropout_rate,
                            donor_input_dim=donor.input_dim if donor else 19)
    model.name = ctc_model_name(cfg)

    if cfg.init_mode == "pretrained":
        if not ws.model_path("regression").is_file():
            raise MissingArtifactError("regression checkpoint (run `pretrain`)", [str(ws.model_path("regression"))])
        source, _ = load_model(ws.model_path("regression"))
        if source.input_dim != input_dim:
            raise ParameterError(f"Regression checkpoint reads {source.input_dim}-dim input, "
                                 f"this run feeds {input_dim}; rerun `pretrain` with the same channels")
        transplant_gru_weights(source, model)
        if cfg.variant == "extended":
            copy_layer_weights(source.layer("dense"), model.layer("adapter"))
        if cfg.freeze_transplanted:
            model.freeze([layer.name for layer in model.gru_layers()[:2]])
    if donor is not None:
        transplant_gru_weights(donor, model, target_layers=DONOR_LAYERS)
    return model


def run_train_ctc(cfg: ExperimentConfig, ws: Workspace) -> TrainingResult:
    train, _ = ensure_split(cfg, ws)
    inputs = model_inputs(cfg, ws, train)
    xs = [inputs[r.id] for r in train]
    scaler = Standardizer.fit(xs)
    note = subset_note(cfg, xs[0].shape[1])
    if note:
        logger.info(note)

    model = prepare_ctc_model(cfg, ws, xs[0].shape[1])
    alphabet = Alphabet(DEFAULT_CHARACTERS)
    stage = f"train-ctc ({model.name})"
    losses, skipped = train_ctc(model, [scaler.apply(x) for x in xs], [r.transcript for r in train], alphabet,
                                cfg.epochs_ctc, cfg.batch_ctc, cfg.learning_rate, cfg.seed, STREAM_CTC, stage)
    path = save_model(ws.model_path(model.name), model, {
        "input_scaler": scaler.to_meta(), "characters": alphabet.characters, "inputs": "eeg",
        "channels": cfg.channel_spec, "init_mode": cfg.init_mode, "variant": cfg.variant,
        "notes": [note] if note else [],
    })
    reports = ReportGenerator().write_loss_curve(model.name, losses, ws.reports_dir, ylabel="CTC loss")
    return TrainingResult(model.name, losses, losses[0], path, skipped=skipped, reports=reports)


# ---------------------------------------------------------------------------
# decoding and evaluation

def _read_hypotheses(path: Path) -> Dict[str, str]:
    hyps = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line:
            utt_id, _, text = line.partition("\t")
            hyps[utt_id] = text
    return hyps


def _write_hypotheses(path: Path, hyps: Dict[str, str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k}\t{v}\n" for k, v in hyps.items()), encoding="utf-8")


def _split_records(cfg: ExperimentConfig, ws: Workspace, split: str) -> List[UtteranceRecord]:
    if split not in ("train", "test"):
        raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
    train, test = ensure_split(cfg, ws)
    return train if split == "train" else test


def _lm_for(cfg: ExperimentConfig, ws: Workspace) -> Optional[CharNGramModel]:
    """The configured LM file, else the workspace one; None when decoding without an LM"""
    if not cfg.use_lm or cfg.lm_weight == 0:
        return None
    path = Path(cfg.lm_path) if cfg.lm_path else ws.lm_path
    if not path.is_file():
        raise MissingArtifactError("language model (run `lm-train`)", [str(path)])
    return load_lm(path)


def run_lm_train(cfg: ExperimentConfig, ws: Workspace) -> CharNGramModel:
    """Character n-gram over training transcripts only"""
    train, _ = ensure_split(cfg, ws)
    lm = train_ngram([r.transcript for r in train], cfg.lm_order, cfg.lm_k, DEFAULT_CHARACTERS)
    save_lm(lm, ws.lm_path)
    logger.info("Trained %d-gram character LM on %d transcripts", cfg.lm_order, len(train))
    return lm


def run_decode(cfg: ExperimentConfig, ws: Workspace, model_name: Optional[str] = None,
               split: str = "test") -> Dict[str, str]:
    """
    Beam-search every utterance of a split; with an LM the no-LM decode is
    written alongside for comparison
    """
    name = model_name or ctc_model_name(cfg)
    path = ws.model_path(name)
    if not path.is_file():
        raise MissingArtifactError(f"CTC checkpoint {name!r} (run `train-ctc`)", [str(path)])
    model, meta = load_model(path)
    lm = _lm_for(cfg, ws)
    alphabet = Alphabet(meta.get("characters", DEFAULT_CHARACTERS))
    scaler = Standardizer.from_meta(meta["input_scaler"])
    records = _split_records(cfg, ws, split)
    if meta.get("inputs") == "acoustic":
        inputs = acoustic_inputs(ws, records)
    else:
        inputs = model_inputs(cfg.replace(channel_subset=tuple(meta.get("channels", "all").split(","))),
                              ws, records)

    hyps, plain = {}, {}
    for record in records:
        logits = model.forward(scaler.apply(inputs[record.id]), mode="infer", skip_softmax=True)
        log_probs = log_softmax(logits, axis=-1)
        if cfg.save_posteriors:
            write_matrix(ws.posterior_path(name, record.id), log_probs)
        plain[record.id] = beam_search_decode(log_probs, alphabet, cfg.beam_width, lm=None, lm_weight=0.0)
        if lm is not None:
            hyps[record.id] = beam_search_decode(log_probs, alphabet, cfg.beam_width, lm=lm,
                                                 lm_weight=cfg.lm_weight)
        else:
            hyps[record.id] = plain[record.id]

    _write_hypotheses(ws.hypotheses_path(f"{name}_{split}"), hyps)
    if lm is not None:
        _write_hypotheses(ws.hypotheses_path(f"{name}_{split}_nolm"), plain)
    logger.info("Decoded %d %s utterances with %s (beam %d, %s)", len(records), split, name, cfg.beam_width,
                f"LM weight {cfg.lm_weight:g}" if lm is not None else "no LM")
    return hyps


def run_eval(cfg: ExperimentConfig, ws: Workspace, model_name: Optional[str] = None,
             split: str = "test") -> EvalReport:
    """Score decoded hypotheses against the split's transcripts and write reports"""
    name = model_name or ctc_model_name(cfg)
    hyp_path = ws.hypotheses_path(f"{name}_{split}")
    _require([hyp_path], "decoded hypotheses (run `decode`)")
    records = _split_records(cfg, ws, split)
    hyps = _read_hypotheses(hyp_path)
    missing = [r.id for r in records if r.id not in hyps]
    if missing:
        raise MissingArtifactError(f"hypotheses in {hyp_path.name}", missing)

    report = evaluate_transcripts([r.id for r in records], [r.transcript for r in records],
                                  [hyps[r.id] for r in records])
    nolm_path = ws.hypotheses_path(f"{name}_{split}_nolm")
    summary: Dict[str, Any] = {"model": name, "split": split, "beam_width": cfg.beam_width}
    if nolm_path.is_file():
        plain = _read_hypotheses(nolm_path)
        nolm = evaluate_transcripts([r.id for r in records], [r.transcript for r in records],
                                    [plain.get(r.id, "") for r in records])
        summary["lm"] = f"{cfg.lm_order}-gram, weight {cfg.lm_weight:g}"
        report.corpus_wer_no_lm = summary["corpus_wer_no_lm"] = nolm.corpus_wer
        report.notes.append(f"LM effect: {nolm.corpus_wer:.2f}% without LM -> {report.corpus_wer:.2f}% with LM")
        logger.info(report.notes[-1])
    else:
        summary["lm"] = "no LM"
        report.notes.append("no LM")

    meta_path = ws.model_path(name)
    if meta_path.is_file():
        _, meta = load_model(meta_path)
        report.notes.extend(meta.get("notes", []))
    ReportGenerator().generate_eval_reports(report, summary, ws.reports_dir, stage=f"eval_{name}_{split}")
    logger.info("%s on %s split: WER %.2f%% over %d utterances", name, split, report.corpus_wer,
                report.n_utterances)
    return report


def run_decode_eval(cfg: ExperimentConfig, ws: Workspace, model_name: Optional[str] = None,
                    split: str = "test") -> EvalReport:
    run_decode(cfg, ws, model_name, split)
    return run_eval(cfg, ws, model_name, split)


# ---------------------------------------------------------------------------
# composite runs

def corpus_counts(records: Sequence[UtteranceRecord]) -> Dict[str, int]:
    """Sentence, word and letter counts of a set of utterances"""
    transcripts = [r.transcript for r in records]
    words = [w for t in transcripts for w in word_tokens(t)]
    return {
        "total_sentences": len(transcripts),
        "unique_sentences": len(set(transcripts)),
        "total_words": len(words),
        "unique_words": len(set(words)),
        "letters": sum(ch.isalpha() for t in transcripts for ch in t),
    }


def prepare_inputs(cfg: ExperimentConfig, ws: Workspace) -> Tuple[List[UtteranceRecord], List[UtteranceRecord]]:
    """Split, then KPCA fit + transform when the run uses all channels"""
    records = load_records(cfg, ws)
    train, test = ensure_split(cfg, ws, records)
    if cfg.channel_subset == ("all",):
        run_kpca_fit(cfg, ws, train)
        run_kpca_transform(cfg, ws, records)
    return train, test


def run_sweep(cfg: ExperimentConfig, ws: Workspace) -> List[Dict[str, Any]]:
    """
    Vocabulary sweep: for each size N, a fresh split, KPCA, LM and both
    initializations trained and scored on the first N unique sentences
    """
    if not cfg.vocabulary_sweep:
        raise ParameterError("vocabulary_sweep is empty; set it in the config or with --vocab")
    rows = []
    notes: List[str] = []
    for size in sorted(cfg.vocabulary_sweep):
        sub_cfg = cfg.replace(vocabulary_limit=size)
        sub_ws = Workspace(ws.root / "sweep" / f"vocab_{size:03d}", shared=ws.base)
        logger.info("=" * 80)
        logger.info("Vocabulary size %d", size)
        _, test = prepare_inputs(sub_cfg, sub_ws)
        run_lm_train(sub_cfg, sub_ws)
        if cfg.variant == "extended":
            run_train_acoustic_ctc(sub_cfg, sub_ws)

        row: Dict[str, Any] = {"vocabulary_limit": size, **corpus_counts(test)}
        for init in ("random", "pretrained"):
            run_cfg = sub_cfg.replace(init_mode=init)
            if init == "pretrained":
                run_pretrain_regression(run_cfg, sub_ws)
            run_train_ctc(run_cfg, sub_ws)
            report = run_decode_eval(run_cfg, sub_ws)
            row[f"wer_{init}"] = report.corpus_wer
            notes.extend(n for n in report.notes if n.startswith("LM effect"))
        rows.append(row)
        logger.info("Vocabulary %d: WER random %.2f%%, pretrained %.2f%%", size,
                    row["wer_random"], row["wer_pretrained"])

    ReportGenerator().generate_sweep_reports(rows, ws.reports_dir, notes)
    return rows


def run_all(cfg: ExperimentConfig, ws: Workspace) -> Dict[str, Any]:
    """Synthesize, prepare and train everything, then score both initializations"""
    records = run_synth(cfg, ws)
    records = load_records(cfg, ws) if cfg.vocabulary_limit else records
    run_preprocess(cfg, ws, records)
    run_features(cfg, ws, records)
    prepare_inputs(cfg, ws)
    run_lm_train(cfg, ws)
    results: Dict[str, Any] = {"pretrain": run_pretrain_regression(cfg, ws),
                               "articulatory": run_train_articulatory_tcn(cfg, ws)}
    if cfg.variant == "extended":
        results["acoustic"] = run_train_acoustic_ctc(cfg, ws)
    for init in ("random", "pretrained"):
        run_cfg = cfg.replace(init_mode=init)
        results[f"ctc_{init}"] = run_train_ctc(run_cfg, ws)
        results[f"eval_{init}"] = run_decode_eval(run_cfg, ws)
    return results

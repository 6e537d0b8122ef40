"""
Binary storage for signals, feature matrices and checkpoints

Matrix file ("NDX1"):
    magic | uint32 rank | uint32 dims[rank] | float64 values (row-major)
All integers and reals are little-endian.

Checkpoint container ("NDXC"):
    magic | uint32 version | uint32 descriptor length | descriptor (UTF-8 JSON text)
    | uint32 entry count | entries | concatenated float64 matrices
    entry: uint32 name length | name (UTF-8) | uint32 rank | uint32 dims[rank] | uint64 offset
Offsets count bytes from the start of the data region.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from errors import FormatError, MissingArtifactError
from kpca import KpcaModel
from model import Model
from recording import FeatureSequence

logger = logging.getLogger(__name__)

MATRIX_MAGIC = b"NDX1"
CHECKPOINT_MAGIC = b"NDXC"
CHECKPOINT_VERSION = 1


def encode_matrix(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    dims = np.array(array.shape, dtype="<u4")
    return MATRIX_MAGIC + np.array([array.ndim], dtype="<u4").tobytes() + dims.tobytes() + array.tobytes()


class _Reader:
    """Bounds-checked cursor over a byte buffer"""

    def __init__(self, data: bytes, path: Optional[str] = None):
        self.data = data
        self.pos = 0
        self.path = path

    def fail(self, message: str):
        raise FormatError(message, path=self.path, offset=self.pos)

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            self.fail(f"Truncated {what}: need {n} bytes, {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def uint32(self, what: str) -> int:
        return int(np.frombuffer(self.take(4, what), dtype="<u4")[0])

    def uint64(self, what: str) -> int:
        return int(np.frombuffer(self.take(8, what), dtype="<u8")[0])

    def shape(self) -> Tuple[int, ...]:
        rank = self.uint32("rank")
        if rank > 8:
            self.fail(f"Implausible rank {rank}")
        return tuple(int(d) for d in np.frombuffer(self.take(4 * rank, "dimensions"), dtype="<u4"))

    def reals(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(self.take(8 * count, "matrix values"), dtype="<f8")
        return values.astype(np.float64).reshape(shape)


def decode_matrix(data: bytes, path: Optional[str] = None) -> np.ndarray:
    reader = _Reader(data, path)
    if reader.take(4, "magic") != MATRIX_MAGIC:
        reader.pos = 0
        reader.fail("Not an NDX1 matrix file")
    array = reader.reals(reader.shape())
    if reader.pos != len(data):
        reader.fail(f"{len(data) - reader.pos} trailing bytes after matrix")
    return array


def write_matrix(path, array: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_matrix(array))
    return path


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError("matrix file", [str(path)])
    return decode_matrix(path.read_bytes(), str(path))


def names_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".names")


def save_features(path, features: FeatureSequence) -> Path:
    """Frames as an NDX1 matrix plus a sidecar with one column name per line"""
    path = write_matrix(path, features.frames)
    names_path(path).write_text("".join(f"{name}\n" for name in features.names), encoding="utf-8")
    return path


def load_features(path, frame_rate_hz: float = 100.0) -> FeatureSequence:
    path = Path(path)
    frames = read_matrix(path)
    sidecar = names_path(path)
    if sidecar.is_file():
        names = sidecar.read_text(encoding="utf-8").splitlines()
    else:
        names = [f"f{i}" for i in range(frames.shape[1])]
    return FeatureSequence(frames, frame_rate_hz, names)


def encode_checkpoint(tensors: Dict[str, np.ndarray], descriptor: Dict[str, Any]) -> bytes:
    text = json.dumps(descriptor, sort_keys=True, indent=1).encode("utf-8")
    header = [CHECKPOINT_MAGIC,
              np.array([CHECKPOINT_VERSION, len(text)], dtype="<u4").tobytes(),
              text,
              np.array([len(tensors)], dtype="<u4").tobytes()]
    blobs = []
    offset = 0
    for name, value in tensors.items():
        value = np.ascontiguousarray(value, dtype="<f8")
        encoded_name = name.encode("utf-8")
        header.append(np.array([len(encoded_name)], dtype="<u4").tobytes())
        header.append(encoded_name)
        header.append(np.array([value.ndim, *value.shape], dtype="<u4").tobytes())
        header.append(np.array([offset], dtype="<u8").tobytes())
        blob = value.tobytes()
        blobs.append(blob)
        offset += len(blob)
    return b"".join(header + blobs)


def decode_checkpoint(data: bytes, path: Optional[str] = None) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    reader = _Reader(data, path)
    if reader.take(4, "magic") != CHECKPOINT_MAGIC:
        reader.pos = 0
        reader.fail("Not an NDXC checkpoint")
    version = reader.uint32("version")
    if version != CHECKPOINT_VERSION:
        reader.fail(f"Unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})")
    text_len = reader.uint32("descriptor length")
    start = reader.pos
    try:
        descriptor = json.loads(reader.take(text_len, "descriptor").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        reader.pos = start
        reader.fail(f"Unreadable descriptor: {exc}")

    entries: List[Tuple[str, Tuple[int, ...], int]] = []
    for _ in range(reader.uint32("entry count")):
        name_length = reader.uint32("name length")
        start = reader.pos
        raw_name = reader.take(name_length, "entry name")
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as exc:
            reader.pos = start
            reader.fail(f"Unreadable entry name: {exc.reason}")
        shape = reader.shape()
        entries.append((name, shape, reader.uint64("offset")))

    base = reader.pos
    tensors: Dict[str, np.ndarray] = {}
    for name, shape, offset in entries:
        reader.pos = base + offset
        tensors[name] = reader.reals(shape)
    return tensors, descriptor


def save_checkpoint(path, tensors: Dict[str, np.ndarray], descriptor: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors, descriptor))
    logger.debug("Wrote checkpoint %s (%d tensors)", path, len(tensors))
    return path


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError("checkpoint", [str(path)])
    return decode_checkpoint(path.read_bytes(), str(path))


def save_model(path, model: Model, meta: Optional[Dict[str, Any]] = None) -> Path:
    """Parameters, batch-norm buffers, topology with trainable flags"""
    tensors = {**model.parameters(), **{f"buffer:{k}": v for k, v in model.buffers().items()}}
    descriptor = {"kind": "model", "name": model.name, "layers": model.topology(), "meta": meta or {}}
    return save_checkpoint(path, tensors, descriptor)


def load_model(path) -> Tuple[Model, Dict[str, Any]]:
    tensors, descriptor = load_checkpoint(path)
    if descriptor.get("kind") != "model":
        raise FormatError(f"Checkpoint holds a {descriptor.get('kind')!r}, not a model", path=str(path))
    model = Model.from_topology(descriptor["name"], descriptor["layers"])
    live = {**model.parameters(), **{f"buffer:{k}": v for k, v in model.buffers().items()}}
    missing = sorted(set(live) - set(tensors))
    if missing:
        raise FormatError(f"Checkpoint lacks tensors: {', '.join(missing[:5])}", path=str(path))
    for key, target in live.items():
        if tensors[key].shape != target.shape:
            raise FormatError(f"Tensor {key} has shape {tensors[key].shape}, topology expects {target.shape}",
                              path=str(path))
        np.copyto(target, tensors[key])
    return model, descriptor.get("meta", {})


def save_kpca(path, model: KpcaModel, extra: Optional[Dict[str, np.ndarray]] = None) -> Path:
    tensors = {
        "training_vectors": model.training_vectors,
        "row_means": model.row_means,
        "eigenvalues": model.eigenvalues,
        "dual_coefficients": model.dual_coefficients,
    }
    if model.training_projections is not None:
        tensors["training_projections"] = model.training_projections
    tensors.update(extra or {})
    descriptor = {"kind": "kpca", "gamma": model.gamma, "coef0": model.coef0, "degree": model.degree,
                  "grand_mean": model.grand_mean, "n_components": model.n_components}
    return save_checkpoint(path, tensors, descriptor)


def load_kpca(path) -> Tuple[KpcaModel, Dict[str, np.ndarray]]:
    """Fitted model and any extra tensors stored alongside it"""
    tensors, descriptor = load_checkpoint(path)
    if descriptor.get("kind") != "kpca":
        raise FormatError(f"Checkpoint holds a {descriptor.get('kind')!r}, not a KPCA model", path=str(path))
    own = ("training_vectors", "row_means", "eigenvalues", "dual_coefficients", "training_projections")
    model = KpcaModel(
        training_vectors=tensors["training_vectors"],
        gamma=float(descriptor["gamma"]),
        coef0=float(descriptor["coef0"]),
        degree=int(descriptor["degree"]),
        row_means=tensors["row_means"],
        grand_mean=float(descriptor["grand_mean"]),
        eigenvalues=tensors["eigenvalues"],
        dual_coefficients=tensors["dual_coefficients"],
        n_components=int(descriptor["n_components"]),
        training_projections=tensors.get("training_projections"),
    )
    return model, {k: v for k, v in tensors.items() if k not in own}

"""
Model assembly: ordered layer stacks, transplant and freezing
"""
import copy
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ModelStateError, ParameterError
from layers import GRU, Dense, Dropout, Layer, Softmax, TcnBlock, layer_from_config
from utils import make_rng

logger = logging.getLogger(__name__)

VARIANTS = ("base", "extended")
DONOR_LAYERS = ("gru128_donor", "gru64_donor")


def length_mask(lengths: Optional[Sequence[int]], batch: int, steps: int) -> np.ndarray:
    """[B x T] boolean mask, True on real (unpadded) frames"""
    if lengths is None:
        return np.ones((batch, steps), dtype=bool)
    lengths = np.asarray(lengths, dtype=int)
    if lengths.shape != (batch,):
        raise ParameterError(f"Expected {batch} sequence lengths, got shape {lengths.shape}")
    if np.any(lengths < 0) or np.any(lengths > steps):
        raise ParameterError(f"Sequence lengths must lie in [0, {steps}]")
    return np.arange(steps)[np.newaxis, :] < lengths[:, np.newaxis]


class Model:
    """Ordered, uniquely named layers with a shared forward/backward pass"""

    def __init__(self, name: str, layers: List[Layer]):
        names = [layer.name for layer in layers]
        if len(set(names)) != len(names):
            raise ParameterError(f"Layer names must be unique, got {names}")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.output_dim() != nxt.input_dim():
                raise ParameterError(
                    f"Layer {nxt.name!r} expects input dimension {nxt.input_dim()}, "
                    f"but {prev.name!r} produces {prev.output_dim()}"
                )
        self.name = name
        self.layers = list(layers)
        self._forward_depth: Optional[int] = None

    def __repr__(self):
        return f"Model({self.name!r}, layers={self.layer_names})"

    @property
    def layer_names(self) -> List[str]:
        return [layer.name for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim()

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim()

    def layer(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ParameterError(f"Model {self.name!r} has no layer {name!r}")

    def forward(self, x: np.ndarray, lengths: Optional[Sequence[int]] = None, mode: str = "infer",
                rng: Optional[np.random.Generator] = None, skip_softmax: bool = False) -> np.ndarray:
        """
        Run the stack on a [B x T x D] batch (or a single [T x D] sequence)

        skip_softmax stops before a trailing softmax layer and returns logits;
        the following backward call then starts from those logits.
        """
        x = np.asarray(x, dtype=np.float64)
        squeezed = x.ndim == 2
        if squeezed:
            x = x[np.newaxis]
        mask = length_mask(lengths, x.shape[0], x.shape[1])

        depth = len(self.layers)
        if skip_softmax and isinstance(self.layers[-1], Softmax):
            depth -= 1
        out = x
        for layer in self.layers[:depth]:
            out = layer.forward(out, mask=mask, mode=mode, rng=rng)
        self._forward_depth = depth
        return out[0] if squeezed else out

    def backward(self, upstream: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        """
        Reverse-mode pass from the last forward output

        Returns gradients of trainable parameters keyed "layer/param" and the
        gradient with respect to the model input. Frozen layers propagate
        input gradients but are absent from the map.
        """
        if self._forward_depth is None:
            raise ModelStateError(f"Model {self.name!r}: backward called before forward")
        g = np.asarray(upstream, dtype=np.float64)
        squeezed = g.ndim == 2
        if squeezed:
            g = g[np.newaxis]

        grads: Dict[str, np.ndarray] = {}
        for layer in reversed(self.layers[:self._forward_depth]):
            g = layer.backward(g, param_grads=layer.trainable)
            if layer.trainable:
                for key, value in layer.grads.items():
                    grads[f"{layer.name}/{key}"] = value
        return grads, (g[0] if squeezed else g)

    def parameters(self, trainable_only: bool = False) -> Dict[str, np.ndarray]:
        """Live parameter arrays keyed "layer/param" in layer order"""
        params = {}
        for layer in self.layers:
            if trainable_only and not layer.trainable:
                continue
            for key, value in layer.params.items():
                params[f"{layer.name}/{key}"] = value
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        """Non-trainable state (batch-norm running statistics)"""
        return {f"{layer.name}/{key}": value for layer in self.layers for key, value in layer.buffers.items()}

    def num_parameters(self) -> int:
        return sum(layer.num_parameters() for layer in self.layers)

    def freeze(self, names: Sequence[str], frozen: bool = True) -> "Model":
        for name in names:
            self.layer(name).trainable = not frozen
        return self

    def frozen_layers(self) -> List[str]:
        return [layer.name for layer in self.layers if not layer.trainable]

    def topology(self) -> List[Dict[str, Any]]:
        return [layer.config() for layer in self.layers]

    @classmethod
    def from_topology(cls, name: str, configs: List[Dict[str, Any]]) -> "Model":
        return cls(name, [layer_from_config(config) for config in configs])

    def copy(self) -> "Model":
        """Deep copy with independent parameter storage"""
        clone = copy.deepcopy(self)
        for layer in clone.layers:
            layer._cache = None
        clone._forward_depth = None
        return clone

    def gru_layers(self) -> List[GRU]:
        return [layer for layer in self.layers if isinstance(layer, GRU)]


def build_regression_model(d_in: int = 30, d_out: int = 19, seed: int = 0, dropout: float = 0.1) -> Model:
    """GRU(128) -> dropout -> GRU(64) -> dropout -> time-distributed dense(d_out)"""
    rng = make_rng(seed, 1)
    layers = [
        GRU("gru128", d_in, 128, rng),
        Dropout("dropout1", 128, dropout),
        GRU("gru64", 128, 64, rng),
        Dropout("dropout2", 64, dropout),
        Dense("dense", 64, d_out, rng),
    ]
    return Model("regression", layers)


def build_ctc_model(d_in: int = 30, vocab_plus_blank: int = 29, variant: str = "base",
                    batchnorm: bool = False, seed: int = 0, gru_dropout: float = 0.1,
                    tcn_dropout: float = 0.0, donor_input_dim: int = 19) -> Model:
    """
    Encoder GRU(128) -> GRU(64) -> TCN(32) -> dense -> softmax

    The extended variant inserts a trainable adapter dense(64 -> donor_input_dim)
    and a frozen GRU(128) -> GRU(64) donor pair after GRU(64).
    """
    if vocab_plus_blank < 2:
        raise ParameterError(f"vocab_plus_blank must be >= 2, got {vocab_plus_blank}")
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")

    rng = make_rng(seed, 2)
    layers: List[Layer] = [
        GRU("gru128", d_in, 128, rng, dropout=gru_dropout),
        GRU("gru64", 128, 64, rng, dropout=gru_dropout),
    ]
    if variant == "extended":
        layers += [
            Dense("adapter", 64, donor_input_dim, rng),
            GRU("gru128_donor", donor_input_dim, 128, rng, trainable=False),
            GRU("gru64_donor", 128, 64, rng, trainable=False),
        ]
    layers += [
        TcnBlock("tcn32", 64, 32, rng, batchnorm=batchnorm, dropout=tcn_dropout),
        Dense("dense", 32, vocab_plus_blank, rng),
        Softmax("softmax", vocab_plus_blank),
    ]
    return Model(f"ctc_{variant}", layers)


def build_articulatory_model(d_in: int = 30, d_out: int = 6, filters: int = 128,
                             dropout: float = 0.2, seed: int = 0) -> Model:
    """TCN(filters) -> dropout -> time-distributed dense(d_out)"""
    rng = make_rng(seed, 3)
    layers = [
        TcnBlock(f"tcn{filters}", d_in, filters, rng),
        Dropout("dropout", filters, dropout),
        Dense("dense", filters, d_out, rng),
    ]
    return Model("articulatory", layers)


def copy_layer_weights(source: Layer, target: Layer):
    """Copy every parameter of source into target by value"""
    if type(source) is not type(target):
        raise ParameterError(f"Cannot copy {source.kind} layer {source.name!r} into "
                             f"{target.kind} layer {target.name!r}")
    for key, value in source.params.items():
        if key not in target.params or target.params[key].shape != value.shape:
            have = target.params[key].shape if key in target.params else None
            raise ParameterError(f"Layer {target.name!r}: parameter {key} has shape {have}, "
                                 f"source {source.name!r} has {value.shape}")
    for key, value in source.params.items():
        np.copyto(target.params[key], value)


def transplant_gru_weights(source: Model, target: Model,
                           target_layers: Optional[Sequence[str]] = None) -> Model:
    """
    Copy the first two GRU layers of source into target

    By default the first two GRU layers of target receive them; pass
    target_layers to fill other slots (the extended variant's donor pair).
    """
    src = source.gru_layers()[:2]
    if target_layers is None:
        dst = target.gru_layers()[:2]
    else:
        dst = [target.layer(name) for name in target_layers]
    if len(src) < 2 or len(dst) < 2:
        raise ParameterError(f"Transplant needs two GRU layers on each side "
                             f"({source.name}: {len(src)}, {target.name}: {len(dst)})")
    # Validate both pairs before touching anything
    for s, d in zip(src, dst):
        for key, value in s.params.items():
            if d.params.get(key) is None or d.params[key].shape != value.shape:
                raise ParameterError(
                    f"Cannot transplant {source.name}/{s.name} into {target.name}/{d.name}: "
                    f"{key} shape {value.shape} vs {d.params[key].shape if key in d.params else None}"
                )
    for s, d in zip(src, dst):
        copy_layer_weights(s, d)
        logger.debug("Transplanted %s/%s -> %s/%s", source.name, s.name, target.name, d.name)
    return target

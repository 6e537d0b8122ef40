"""
Sequence-network layers with exact reverse-mode gradients

Every layer consumes and produces batches shaped [B x T x D]. Sequences are
right-padded; `mask` ([B x T], True on real frames) only matters to batch
normalization, because all other layers are causal or frame-local.
Parameters are updated in place, never rebound, so views taken by the
optimizer and by checkpoints stay valid.
"""
import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from scipy.special import softmax as _softmax

from errors import ModelStateError, ParameterError
from utils import glorot_uniform

logger = logging.getLogger(__name__)

MODES = ("train", "infer")
BN_MOMENTUM = 0.99
BN_EPSILON = 1e-3
GRU_GATES = ("z", "r", "h")


def _check_mode(mode: str):
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")


def _check_input(x: np.ndarray, dim: int, who: str):
    if x.ndim != 3:
        raise ParameterError(f"{who}: expected [B x T x D] input, got shape {x.shape}")
    if x.shape[2] != dim:
        raise ParameterError(f"{who}: expected input dimension {dim}, got {x.shape[2]}")


def _dropout_mask(shape: Tuple[int, ...], rate: float, rng: Optional[np.random.Generator]) -> np.ndarray:
    if rng is None:
        raise ParameterError("Train-mode dropout needs a random generator")
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _check_rate(rate: float):
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"Dropout rate must be in [0, 1), got {rate}")


class Layer:
    """Base class: named parameters, gradient slots, trainable flag"""

    kind = "layer"

    def __init__(self, name: str, trainable: bool = True):
        self.name = name
        self.trainable = trainable
        self.params: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None, mode: str = "infer",
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray, param_grads: bool = True) -> np.ndarray:
        raise NotImplementedError

    def output_dim(self) -> int:
        raise NotImplementedError

    def input_dim(self) -> int:
        raise NotImplementedError

    def config(self) -> Dict[str, Any]:
        return {"kind": self.kind, "name": self.name, "trainable": self.trainable}

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def _require_cache(self):
        if self._cache is None:
            raise ModelStateError(f"Layer {self.name!r}: backward called without a preceding forward pass")
        return self._cache


class Dense(Layer):
    """Time-distributed affine map with linear activation: y = x W^T + b"""

    kind = "dense"

    def __init__(self, name: str, d_in: int, d_out: int, rng: Optional[np.random.Generator] = None,
                 trainable: bool = True):
        super().__init__(name, trainable)
        self.d_in, self.d_out = int(d_in), int(d_out)
        W = glorot_uniform(rng, d_out, d_in) if rng is not None else np.zeros((d_out, d_in))
        self.params = {"W": W, "b": np.zeros(d_out)}

    def input_dim(self) -> int:
        return self.d_in

    def output_dim(self) -> int:
        return self.d_out

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "d_in": self.d_in, "d_out": self.d_out}

    def forward(self, x, mask=None, mode="infer", rng=None):
        _check_input(x, self.d_in, self.name)
        self._cache = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, grad_out, param_grads=True):
        x = self._require_cache()
        if param_grads:
            g2 = grad_out.reshape(-1, self.d_out)
            self.grads = {"W": g2.T @ x.reshape(-1, self.d_in), "b": g2.sum(axis=0)}
        return grad_out @ self.params["W"]


class GRU(Layer):
    """
    Gated recurrent unit

        z  = sigmoid(W_z x + U_z h + b_z)
        r  = sigmoid(W_r x + U_r h + b_r)
        h~ = tanh(W_h x + U_h (r * h) + b_h)
        h' = (1 - z) * h + z * h~

    Optional dropout on the layer input (train mode only).
    """

    kind = "gru"

    def __init__(self, name: str, d_in: int, hidden: int, rng: Optional[np.random.Generator] = None,
                 dropout: float = 0.0, trainable: bool = True):
        super().__init__(name, trainable)
        _check_rate(dropout)
        self.d_in, self.hidden, self.dropout = int(d_in), int(hidden), float(dropout)
        for gate in GRU_GATES:
            self.params[f"W_{gate}"] = (glorot_uniform(rng, hidden, d_in) if rng is not None
                                        else np.zeros((hidden, d_in)))
        for gate in GRU_GATES:
            self.params[f"U_{gate}"] = (glorot_uniform(rng, hidden, hidden) if rng is not None
                                        else np.zeros((hidden, hidden)))
        for gate in GRU_GATES:
            self.params[f"b_{gate}"] = np.zeros(hidden)
        self.grad_h0 = None

    def input_dim(self) -> int:
        return self.d_in

    def output_dim(self) -> int:
        return self.hidden

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "d_in": self.d_in, "hidden": self.hidden, "dropout": self.dropout}

    def forward(self, x, mask=None, mode="infer", rng=None, h0: Optional[np.ndarray] = None):
        _check_mode(mode)
        _check_input(x, self.d_in, self.name)
        p = self.params
        B, T, _ = x.shape
        H = self.hidden

        keep = None
        if mode == "train" and self.dropout > 0:
            keep = _dropout_mask(x.shape, self.dropout, rng)
            x = x * keep

        if h0 is None:
            h = np.zeros((B, H))
        else:
            h0 = np.asarray(h0, dtype=np.float64)
            if h0.shape[-1] != H:
                raise ParameterError(f"{self.name}: initial state has size {h0.shape[-1]}, expected {H}")
            h = np.broadcast_to(h0, (B, H)).copy()

        xz = x @ p["W_z"].T + p["b_z"]
        xr = x @ p["W_r"].T + p["b_r"]
        xh = x @ p["W_h"].T + p["b_h"]

        out = np.empty((B, T, H))
        h_prev = np.empty((T, B, H))
        zs = np.empty((T, B, H))
        rs = np.empty((T, B, H))
        hcs = np.empty((T, B, H))
        for t in range(T):
            z = expit(xz[:, t] + h @ p["U_z"].T)
            r = expit(xr[:, t] + h @ p["U_r"].T)
            hc = np.tanh(xh[:, t] + (r * h) @ p["U_h"].T)
            h_prev[t], zs[t], rs[t], hcs[t] = h, z, r, hc
            h = (1.0 - z) * h + z * hc
            out[:, t] = h

        self._cache = (x, keep, h_prev, zs, rs, hcs)
        return out

    def backward(self, grad_out, param_grads=True):
        x, keep, h_prev, zs, rs, hcs = self._require_cache()
        p = self.params
        B, T, _ = x.shape
        H = self.hidden

        d_az = np.zeros((B, T, H))
        d_ar = np.zeros((B, T, H))
        d_ah = np.zeros((B, T, H))
        dU = {gate: np.zeros((H, H)) for gate in GRU_GATES}
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = dh + grad_out[:, t]
            hp, z, r, hc = h_prev[t], zs[t], rs[t], hcs[t]

            dz = dh * (hc - hp)
            dhc = dh * z
            dhp = dh * (1.0 - z)

            dah = dhc * (1.0 - hc ** 2)
            drh = dah @ p["U_h"]
            dr = drh * hp
            dhp += drh * r

            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            dhp += daz @ p["U_z"] + dar @ p["U_r"]

            if param_grads:
                dU["h"] += dah.T @ (r * hp)
                dU["z"] += daz.T @ hp
                dU["r"] += dar.T @ hp
            d_az[:, t], d_ar[:, t], d_ah[:, t] = daz, dar, dah
            dh = dhp

        self.grad_h0 = dh
        if param_grads:
            x2 = x.reshape(-1, self.d_in)
            grads = {}
            for gate, da in zip(GRU_GATES, (d_az, d_ar, d_ah)):
                da2 = da.reshape(-1, H)
                grads[f"W_{gate}"] = da2.T @ x2
                grads[f"U_{gate}"] = dU[gate]
                grads[f"b_{gate}"] = da2.sum(axis=0)
            self.grads = grads

        dx = d_az @ p["W_z"] + d_ar @ p["W_r"] + d_ah @ p["W_h"]
        if keep is not None:
            dx = dx * keep
        return dx


def batchnorm_train(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, mask: Optional[np.ndarray],
                    eps: float = BN_EPSILON):
    """Normalize by statistics of the real (unpadded) frames; returns (y, mean, var, cache)"""
    valid = np.ones(x.shape[:2], dtype=bool) if mask is None else mask
    n = int(valid.sum())
    if n == 0:
        raise ParameterError("Batch normalization over an empty batch")
    frames = x[valid]
    mean = frames.mean(axis=0)
    var = frames.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    y = gamma * x_hat + beta
    return y, mean, var, (x_hat, inv_std, valid, n)


def batchnorm_train_backward(grad_out: np.ndarray, gamma: np.ndarray, cache):
    x_hat, inv_std, valid, n = cache
    w = valid[..., np.newaxis].astype(np.float64)
    g = grad_out * w
    d_gamma = (g * x_hat).sum(axis=(0, 1))
    d_beta = g.sum(axis=(0, 1))
    d_xhat = g * gamma
    sum_d = d_xhat.sum(axis=(0, 1))
    sum_dx = (d_xhat * x_hat * w).sum(axis=(0, 1))
    dx = (inv_std / n) * (n * d_xhat - sum_d - x_hat * sum_dx)
    return dx * w, d_gamma, d_beta


class BatchNorm(Layer):
    """Per-channel batch normalization with running statistics (momentum 0.99)"""

    kind = "batchnorm"

    def __init__(self, name: str, channels: int, trainable: bool = True,
                 momentum: float = BN_MOMENTUM, eps: float = BN_EPSILON):
        super().__init__(name, trainable)
        self.channels = int(channels)
        self.momentum, self.eps = float(momentum), float(eps)
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels),
                        "initialized": np.zeros(1)}

    def input_dim(self) -> int:
        return self.channels

    def output_dim(self) -> int:
        return self.channels

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "channels": self.channels}

    def forward(self, x, mask=None, mode="infer", rng=None):
        _check_mode(mode)
        _check_input(x, self.channels, self.name)
        gamma, beta = self.params["gamma"], self.params["beta"]
        if mode == "train":
            y, mean, var, cache = batchnorm_train(x, gamma, beta, mask, self.eps)
            self._update_running(mean, var)
            self._cache = ("train", cache)
            return y
        if not self.buffers["initialized"][0]:
            raise ModelStateError(f"Batch norm {self.name!r}: inference before any training statistics")
        inv_std = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
        x_hat = (x - self.buffers["running_mean"]) * inv_std
        self._cache = ("infer", (x_hat, inv_std))
        return gamma * x_hat + beta

    def _update_running(self, mean, var):
        b = self.buffers
        if b["initialized"][0]:
            b["running_mean"][...] = self.momentum * b["running_mean"] + (1.0 - self.momentum) * mean
            b["running_var"][...] = self.momentum * b["running_var"] + (1.0 - self.momentum) * var
        else:
            b["running_mean"][...] = mean
            b["running_var"][...] = var
            b["initialized"][0] = 1.0

    def backward(self, grad_out, param_grads=True):
        mode, cache = self._require_cache()
        gamma = self.params["gamma"]
        if mode == "train":
            dx, d_gamma, d_beta = batchnorm_train_backward(grad_out, gamma, cache)
        else:
            x_hat, inv_std = cache
            dx = grad_out * gamma * inv_std
            d_gamma = (grad_out * x_hat).sum(axis=(0, 1))
            d_beta = grad_out.sum(axis=(0, 1))
        if param_grads:
            self.grads = {"gamma": d_gamma, "beta": d_beta}
        return dx


class Dropout(Layer):
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate)"""

    kind = "dropout"

    def __init__(self, name: str, dim: int, rate: float):
        super().__init__(name, trainable=True)
        _check_rate(rate)
        self.dim, self.rate = int(dim), float(rate)

    def input_dim(self) -> int:
        return self.dim

    def output_dim(self) -> int:
        return self.dim

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "dim": self.dim, "rate": self.rate}

    def forward(self, x, mask=None, mode="infer", rng=None):
        _check_mode(mode)
        if mode == "train" and self.rate > 0:
            keep = _dropout_mask(x.shape, self.rate, rng)
            self._cache = keep
            return x * keep
        self._cache = 1.0
        return x

    def backward(self, grad_out, param_grads=True):
        keep = self._require_cache()
        return grad_out * keep


class Softmax(Layer):
    """Row-wise softmax over the last axis"""

    kind = "softmax"

    def __init__(self, name: str, dim: int):
        super().__init__(name, trainable=True)
        self.dim = int(dim)

    def input_dim(self) -> int:
        return self.dim

    def output_dim(self) -> int:
        return self.dim

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "dim": self.dim}

    def forward(self, x, mask=None, mode="infer", rng=None):
        y = _softmax(x, axis=-1)
        self._cache = y
        return y

    def backward(self, grad_out, param_grads=True):
        y = self._require_cache()
        return y * (grad_out - (grad_out * y).sum(axis=-1, keepdims=True))


def _shift_right(u: np.ndarray, d: int) -> np.ndarray:
    """u delayed by d steps along time with zero fill (causal padding)"""
    out = np.zeros_like(u)
    if d < u.shape[1]:
        out[:, d:] = u[:, :u.shape[1] - d]
    return out


def _shift_left(g: np.ndarray, d: int) -> np.ndarray:
    """Adjoint of _shift_right"""
    out = np.zeros_like(g)
    if d < g.shape[1]:
        out[:, :g.shape[1] - d] = g[:, d:]
    return out


class TcnBlock(Layer):
    """
    One residual stack of causal width-2 convolutions

    Path: for each dilation d, y_t = K[0] u_{t-d} + K[1] u_t + bias (linear),
    then optional batch norm, then optional dropout. Output is the residual
    (identity, or 1x1 projection when channel counts differ) plus the path.
    """

    kind = "tcn"

    def __init__(self, name: str, c_in: int, c_out: int, rng: Optional[np.random.Generator] = None,
                 dilations: Sequence[int] = (1, 2, 4, 8), batchnorm: bool = False,
                 dropout: float = 0.0, projection: Optional[bool] = None, trainable: bool = True):
        super().__init__(name, trainable)
        _check_rate(dropout)
        self.c_in, self.c_out = int(c_in), int(c_out)
        self.dilations = tuple(int(d) for d in dilations)
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ParameterError(f"Dilations must be positive integers, got {dilations}")
        self.batchnorm = bool(batchnorm)
        self.dropout = float(dropout)
        self.projection = (c_in != c_out) if projection is None else bool(projection)
        if not self.projection and c_in != c_out:
            raise ParameterError(f"{name}: identity residual needs c_in == c_out ({c_in} != {c_out})")
        self.momentum, self.eps = BN_MOMENTUM, BN_EPSILON

        for i, _ in enumerate(self.dilations):
            width_in = self.c_in if i == 0 else self.c_out
            if rng is not None:
                limit = np.sqrt(6.0 / (2 * width_in + 2 * self.c_out))
                kernel = rng.uniform(-limit, limit, size=(2, self.c_out, width_in))
            else:
                kernel = np.zeros((2, self.c_out, width_in))
            self.params[f"conv{i}.kernel"] = kernel
            self.params[f"conv{i}.bias"] = np.zeros(self.c_out)
            if self.batchnorm:
                self.params[f"bn{i}.gamma"] = np.ones(self.c_out)
                self.params[f"bn{i}.beta"] = np.zeros(self.c_out)
                self.buffers[f"bn{i}.running_mean"] = np.zeros(self.c_out)
                self.buffers[f"bn{i}.running_var"] = np.ones(self.c_out)
                self.buffers[f"bn{i}.initialized"] = np.zeros(1)
        if self.projection:
            self.params["residual.kernel"] = (glorot_uniform(rng, self.c_out, self.c_in) if rng is not None
                                              else np.zeros((self.c_out, self.c_in)))
            self.params["residual.bias"] = np.zeros(self.c_out)

    def input_dim(self) -> int:
        return self.c_in

    def output_dim(self) -> int:
        return self.c_out

    def config(self) -> Dict[str, Any]:
        return {**super().config(), "c_in": self.c_in, "c_out": self.c_out,
                "dilations": list(self.dilations), "batchnorm": self.batchnorm,
                "dropout": self.dropout, "projection": self.projection}

    def forward(self, x, mask=None, mode="infer", rng=None):
        _check_mode(mode)
        _check_input(x, self.c_in, self.name)
        p = self.params
        steps = []
        u = x
        for i, d in enumerate(self.dilations):
            kernel = p[f"conv{i}.kernel"]
            past = _shift_right(u, d)
            y = past @ kernel[0].T + u @ kernel[1].T + p[f"conv{i}.bias"]
            step = {"u": u, "past": past}
            if self.batchnorm:
                y, step["bn"] = self._bn_forward(i, y, mask, mode)
            if mode == "train" and self.dropout > 0:
                keep = _dropout_mask(y.shape, self.dropout, rng)
                step["keep"] = keep
                y = y * keep
            steps.append(step)
            u = y

        if self.projection:
            residual = x @ p["residual.kernel"].T + p["residual.bias"]
        else:
            residual = x
        self._cache = (x, steps)
        return residual + u

    def _bn_forward(self, i, y, mask, mode):
        gamma, beta = self.params[f"bn{i}.gamma"], self.params[f"bn{i}.beta"]
        b = self.buffers
        if mode == "train":
            out, mean, var, cache = batchnorm_train(y, gamma, beta, mask, self.eps)
            if b[f"bn{i}.initialized"][0]:
                b[f"bn{i}.running_mean"][...] = self.momentum * b[f"bn{i}.running_mean"] + (1 - self.momentum) * mean
                b[f"bn{i}.running_var"][...] = self.momentum * b[f"bn{i}.running_var"] + (1 - self.momentum) * var
            else:
                b[f"bn{i}.running_mean"][...] = mean
                b[f"bn{i}.running_var"][...] = var
                b[f"bn{i}.initialized"][0] = 1.0
            return out, ("train", cache)
        if not b[f"bn{i}.initialized"][0]:
            raise ModelStateError(f"Batch norm in {self.name!r}: inference before any training statistics")
        inv_std = 1.0 / np.sqrt(b[f"bn{i}.running_var"] + self.eps)
        x_hat = (y - b[f"bn{i}.running_mean"]) * inv_std
        return gamma * x_hat + beta, ("infer", (x_hat, inv_std))

    def backward(self, grad_out, param_grads=True):
        x, steps = self._require_cache()
        p = self.params
        grads = {}
        g = grad_out
        for i in range(len(self.dilations) - 1, -1, -1):
            d = self.dilations[i]
            step = steps[i]
            if "keep" in step:
                g = g * step["keep"]
            if "bn" in step:
                mode, cache = step["bn"]
                gamma = p[f"bn{i}.gamma"]
                if mode == "train":
                    g, d_gamma, d_beta = batchnorm_train_backward(g, gamma, cache)
                else:
                    x_hat, inv_std = cache
                    d_gamma = (g * x_hat).sum(axis=(0, 1))
                    d_beta = g.sum(axis=(0, 1))
                    g = g * gamma * inv_std
                grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = d_gamma, d_beta
            kernel = p[f"conv{i}.kernel"]
            u, past = step["u"], step["past"]
            if param_grads:
                g2 = g.reshape(-1, self.c_out)
                k_grad = np.empty_like(kernel)
                k_grad[0] = g2.T @ past.reshape(-1, kernel.shape[2])
                k_grad[1] = g2.T @ u.reshape(-1, kernel.shape[2])
                grads[f"conv{i}.kernel"] = k_grad
                grads[f"conv{i}.bias"] = g2.sum(axis=0)
            g = g @ kernel[1] + _shift_left(g @ kernel[0], d)

        if self.projection:
            if param_grads:
                go2 = grad_out.reshape(-1, self.c_out)
                grads["residual.kernel"] = go2.T @ x.reshape(-1, self.c_in)
                grads["residual.bias"] = go2.sum(axis=0)
            dx = g + grad_out @ p["residual.kernel"]
        else:
            dx = g + grad_out
        if param_grads:
            self.grads = grads
        return dx


LAYER_TYPES = {cls.kind: cls for cls in (Dense, GRU, BatchNorm, Dropout, Softmax, TcnBlock)}


def layer_from_config(config: Dict[str, Any]) -> Layer:
    """Rebuild a zero-initialized layer from its topology descriptor"""
    kind = config.get("kind")
    name = config["name"]
    trainable = bool(config.get("trainable", True))
    if kind == "dense":
        layer = Dense(name, config["d_in"], config["d_out"], trainable=trainable)
    elif kind == "gru":
        layer = GRU(name, config["d_in"], config["hidden"], dropout=config.get("dropout", 0.0),
                    trainable=trainable)
    elif kind == "batchnorm":
        layer = BatchNorm(name, config["channels"], trainable=trainable)
    elif kind == "dropout":
        layer = Dropout(name, config["dim"], config["rate"])
    elif kind == "softmax":
        layer = Softmax(name, config["dim"])
    elif kind == "tcn":
        layer = TcnBlock(name, config["c_in"], config["c_out"], dilations=config["dilations"],
                         batchnorm=config["batchnorm"], dropout=config["dropout"],
                         projection=config["projection"], trainable=trainable)
    else:
        raise ParameterError(f"Unknown layer kind {kind!r}")
    return layer


# Functional forms over single [T x D] sequences or [B x T x D] batches

def _as_batch(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[np.newaxis], True
    return x, False


def _restore(y: np.ndarray, squeezed: bool) -> np.ndarray:
    return y[0] if squeezed else y


def _load_params(layer: Layer, params: Dict[str, np.ndarray]):
    for key, value in params.items():
        if key not in layer.params:
            raise ParameterError(f"{layer.name}: unknown parameter {key!r}")
        value = np.asarray(value, dtype=np.float64)
        if value.shape != layer.params[key].shape:
            raise ParameterError(f"{layer.name}: parameter {key!r} has shape {value.shape}, "
                                 f"expected {layer.params[key].shape}")
        layer.params[key][...] = value


def dense_forward(x, params: Dict[str, np.ndarray]) -> np.ndarray:
    xb, squeezed = _as_batch(x)
    W = np.asarray(params["W"], dtype=np.float64)
    layer = Dense("dense", W.shape[1], W.shape[0])
    _load_params(layer, params)
    return _restore(layer.forward(xb), squeezed)


def gru_forward(x, params: Dict[str, np.ndarray], h0=None) -> np.ndarray:
    xb, squeezed = _as_batch(x)
    W_z = np.asarray(params["W_z"], dtype=np.float64)
    layer = GRU("gru", W_z.shape[1], W_z.shape[0])
    _load_params(layer, params)
    return _restore(layer.forward(xb, h0=h0), squeezed)


def tcn_forward(x, block: TcnBlock, mode: str = "infer", rng=None) -> np.ndarray:
    xb, squeezed = _as_batch(x)
    return _restore(block.forward(xb, mode=mode, rng=rng), squeezed)


def batchnorm_forward(x, layer: BatchNorm, mode: str = "infer") -> np.ndarray:
    xb, squeezed = _as_batch(x)
    return _restore(layer.forward(xb, mode=mode), squeezed)


def dropout_forward(x, rate: float, mode: str = "train", rng_seed: int = 0) -> np.ndarray:
    _check_rate(rate)
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if mode == "infer" or rate == 0:
        return x.copy()
    return x * _dropout_mask(x.shape, rate, np.random.default_rng(rng_seed))


def softmax(x) -> np.ndarray:
    """Row-wise softmax with max subtraction"""
    return _softmax(np.asarray(x, dtype=np.float64), axis=-1)


def mse_loss(pred, target, mask: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    Mean squared error over all (unmasked) elements and its gradient
    2 (pred - target) / count
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ParameterError(f"Prediction shape {pred.shape} does not match target shape {target.shape}")
    diff = pred - target
    if mask is not None:
        weights = np.broadcast_to(mask[..., np.newaxis], pred.shape).astype(np.float64)
        diff = diff * weights
        count = weights.sum()
    else:
        count = diff.size
    if count == 0:
        return 0.0, np.zeros_like(pred)
    return float((diff ** 2).sum() / count), 2.0 * diff / count

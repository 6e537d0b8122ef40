"""
Adam optimizer with bias correction
"""
import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates per named parameter"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError(f"Learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("Adam betas must lie in [0, 1)")


def adam_step(state: AdamState, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    One update of every parameter that has a gradient, in place

        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g^2
        theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
    """
    for key, g in grads.items():
        if key not in params:
            raise ParameterError(f"Gradient for unknown parameter {key!r}")
        if np.shape(g) != params[key].shape:
            raise ParameterError(f"Gradient shape {np.shape(g)} does not match parameter {key!r} {params[key].shape}")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for key, g in grads.items():
        theta = params[key]
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(theta)
            state.v[key] = np.zeros_like(theta)
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params

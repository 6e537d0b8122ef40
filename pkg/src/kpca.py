"""
Kernel PCA with a polynomial kernel
Reduces frame-level EEG features (155 dims) to a small number of components.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from errors import ParameterError, RankError

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


def poly_kernel(x, y, gamma: float, coef0: float, degree: int = 3) -> float:
    """(gamma * <x, y> + coef0) ** degree"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ParameterError(f"Kernel arguments differ in length: {x.shape} vs {y.shape}")
    return float((gamma * np.dot(x, y) + coef0) ** degree)


def poly_kernel_matrix(X: np.ndarray, Y: np.ndarray, gamma: float, coef0: float, degree: int = 3) -> np.ndarray:
    """Kernel between every row of X [M x D] and every row of Y [N x D]"""
    return (gamma * (X @ Y.T) + coef0) ** degree


def center_kernel(K: np.ndarray) -> np.ndarray:
    """Double-centering K - 1K - K1 + 1K1 with 1 the all-(1/N) matrix"""
    return K - K.mean(axis=0)[np.newaxis, :] - K.mean(axis=1)[:, np.newaxis] + K.mean()


@dataclass(eq=False)
class KpcaModel:
    """Fitted polynomial-kernel PCA"""
    training_vectors: np.ndarray
    gamma: float
    coef0: float
    degree: int
    row_means: np.ndarray
    grand_mean: float
    eigenvalues: np.ndarray          # clamped, descending, full spectrum
    dual_coefficients: np.ndarray    # [N x n_components]
    n_components: int
    training_projections: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def input_dim(self) -> int:
        return self.training_vectors.shape[1]

    @property
    def usable_rank(self) -> int:
        return usable_rank(self.eigenvalues)


def usable_rank(eigenvalues: np.ndarray) -> int:
    """Count of eigenvalues above RANK_TOLERANCE times the largest one"""
    if eigenvalues.size == 0 or eigenvalues[0] <= 0:
        return 0
    return int(np.sum(eigenvalues > RANK_TOLERANCE * eigenvalues[0]))


def fit_kpca(X: np.ndarray, n_components: int = 30, gamma: Optional[float] = None,
             coef0: float = 1.0, degree: int = 3) -> KpcaModel:
    """
    Eigendecomposition of the double-centered kernel matrix

    Dual coefficients are unit eigenvectors scaled by 1/sqrt(lambda), so the
    training projection onto component j is sqrt(lambda_j) * v_j and its
    sum of squares over the training set equals lambda_j.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError(f"Training matrix must be [N x D], got shape {X.shape}")
    n_samples, dim = X.shape
    if n_components < 1:
        raise ParameterError(f"n_components must be >= 1, got {n_components}")
    if n_components > n_samples:
        raise ParameterError(f"n_components ({n_components}) exceeds the number of training vectors ({n_samples})")
    if gamma is None:
        gamma = 1.0 / dim

    K = poly_kernel_matrix(X, X, gamma, coef0, degree)
    K = 0.5 * (K + K.T)
    row_means = K.mean(axis=0)
    grand_mean = float(K.mean())
    K_c = center_kernel(K)
    K_c = 0.5 * (K_c + K_c.T)

    eigvals, eigvecs = eigh(K_c)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    eigvals = np.where(eigvals < 0.0, 0.0, eigvals)

    rank = usable_rank(eigvals)
    if rank < n_components:
        raise RankError(n_components, rank)

    vecs = eigvecs[:, :n_components].copy()
    # Sign convention: largest-magnitude entry of each component is positive
    for j in range(n_components):
        pivot = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[pivot, j] < 0:
            vecs[:, j] = -vecs[:, j]
    lambdas = eigvals[:n_components]
    dual = vecs / np.sqrt(lambdas)[np.newaxis, :]

    model = KpcaModel(
        training_vectors=X.copy(),
        gamma=float(gamma),
        coef0=float(coef0),
        degree=int(degree),
        row_means=row_means,
        grand_mean=grand_mean,
        eigenvalues=eigvals,
        dual_coefficients=dual,
        n_components=int(n_components),
    )
    model.training_projections = K_c @ dual
    logger.info("Fitted KPCA on %d vectors of dim %d: %d components, usable rank %d",
                n_samples, dim, n_components, rank)
    return model


def transform(model: KpcaModel, X: np.ndarray) -> np.ndarray:
    """Out-of-sample projection [M x n_components]"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.shape[1] != model.input_dim:
        raise ParameterError(f"Input dimension {X.shape[1]} does not match training dimension {model.input_dim}")
    K_new = poly_kernel_matrix(X, model.training_vectors, model.gamma, model.coef0, model.degree)
    K_new_c = (K_new
               - K_new.mean(axis=1)[:, np.newaxis]
               - model.row_means[np.newaxis, :]
               + model.grand_mean)
    return K_new_c @ model.dual_coefficients


def cumulative_explained_variance(eigenvalues: np.ndarray) -> np.ndarray:
    """Cumulative share of the positive eigenvalue mass, over the usable rank"""
    eigenvalues = np.sort(np.asarray(eigenvalues, dtype=np.float64))[::-1]
    rank = usable_rank(eigenvalues)
    if rank == 0:
        return np.zeros(0)
    running = np.cumsum(eigenvalues[:rank])
    ratios = running / running[-1]
    ratios[-1] = 1.0
    return ratios


def explained_variance(model: KpcaModel) -> np.ndarray:
    return cumulative_explained_variance(model.eigenvalues)


def components_for_variance(model: KpcaModel, target: float) -> int:
    """Smallest component count whose cumulative explained variance reaches target"""
    ratios = explained_variance(model)
    hits = np.nonzero(ratios >= target - 1e-12)[0]
    return int(hits[0]) + 1 if hits.size else ratios.size

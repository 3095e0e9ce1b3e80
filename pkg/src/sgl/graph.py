"""Superpixel graph construction and Local and Global Consistency (LGC)
label propagation.

``kernel_beta`` balances mean and neighbour-weighted features in the spectral
kernel; ``lgc_beta = mu / (1 + mu)`` and ``alpha = 1 - lgc_beta`` are the
propagation constants. The two are distinct parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .core import TrainingSet
from .errors import NumericalError
from .features import SuperpixelFeatures
from .superpixel import SuperpixelMap

__all__ = [
    "GraphConfig",
    "WeightedGraph",
    "pair_weight",
    "log_pair_weights",
    "build_knn_graph",
    "lift_labels",
    "normalized_affinity",
    "lgc_solve",
    "lgc_iterate",
    "lgc_cost",
    "assign_labels",
    "project_to_pixels",
    "UNCLASSIFIED",
    "DENSE_LIMIT",
]

UNCLASSIFIED = 0
DENSE_LIMIT = 4096


@dataclass(frozen=True)
class GraphConfig:
    kernel_beta: float = 0.9
    sigma_s: float = 0.20
    sigma_l: float = 0.45
    k_nn: int = 8
    mu: float = 0.125

    def __post_init__(self):
        if not 0 <= self.kernel_beta <= 1:
            raise ValueError("kernel_beta must lie in [0, 1]")
        if self.sigma_s <= 0 or self.sigma_l <= 0:
            raise ValueError("kernel widths must be positive")
        if self.k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def lgc_beta(self) -> float:
        return self.mu / (1.0 + self.mu)

    @property
    def alpha(self) -> float:
        return 1.0 - self.lgc_beta


@dataclass(frozen=True)
class WeightedGraph:
    weights: sp.csr_matrix

    @property
    def num_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()


def log_pair_weights(features: SuperpixelFeatures, cfg: GraphConfig) -> np.ndarray:
    """Dense matrix of log w_ij (diagonal set to -inf)."""
    Sw, Sm, Sp = features.weighted, features.mean, features.centroid
    dw = _sqdist(Sw)
    dm = _sqdist(Sm)
    dp = _sqdist(Sp)
    b = cfg.kernel_beta
    logw = ((b - 1.0) * dw - b * dm) / cfg.sigma_s ** 2 - dp / cfg.sigma_l ** 2
    np.fill_diagonal(logw, -np.inf)
    return logw


def _sqdist(A: np.ndarray) -> np.ndarray:
    # explicit differences rather than the Gram trick: exact zeros on the diagonal
    # and for identical rows
    out = np.empty((A.shape[0], A.shape[0]))
    for i in range(A.shape[0]):
        out[i] = ((A - A[i]) ** 2).sum(1)
    return out


def pair_weight(i: int, j: int, features: SuperpixelFeatures, cfg: GraphConfig) -> float:
    """Product of the spectral and spatial Gaussian kernels between two superpixels."""
    if i == j:
        raise ValueError("pair_weight needs two distinct superpixels")
    b = cfg.kernel_beta
    dw = float(((features.weighted[i] - features.weighted[j]) ** 2).sum())
    dm = float(((features.mean[i] - features.mean[j]) ** 2).sum())
    dp = float(((features.centroid[i] - features.centroid[j]) ** 2).sum())
    s = np.exp(((b - 1.0) * dw - b * dm) / cfg.sigma_s ** 2)
    l = np.exp(-dp / cfg.sigma_l ** 2)
    return float(s * l)


def build_knn_graph(features: SuperpixelFeatures, cfg: GraphConfig) -> WeightedGraph:
    """Keep each node's ``k_nn`` strongest partners, symmetrized by union.

    Ranking uses the log-weights so underflowed weights still order correctly;
    ties go to the lower index.
    """
    k = features.count
    if k < 2:
        raise ValueError("need at least 2 superpixels to build a graph")
    logw = log_pair_weights(features, cfg)
    kk = min(cfg.k_nn, k - 1)
    rows = np.repeat(np.arange(k), kk)
    cols = np.empty(k * kk, dtype=np.int64)
    for i in range(k):
        cols[i * kk:(i + 1) * kk] = np.argsort(-logw[i], kind="stable")[:kk]
    keep = np.zeros((k, k), dtype=bool)
    keep[rows, cols] = True
    keep |= keep.T
    r, c = np.nonzero(keep)
    W = sp.csr_matrix((np.exp(logw[r, c]), (r, c)), shape=(k, k))
    return WeightedGraph(W)


def lift_labels(smap: SuperpixelMap, train: TrainingSet, num_classes: int, mode: str = "labeled") -> np.ndarray:
    """Initial superpixel label matrix Y (K x c).

    Row v holds the class histogram of the training pixels inside superpixel v,
    divided by the number of training pixels in v (``mode="labeled"``) or by
    the superpixel's size (``mode="all"``). Superpixels without training
    pixels get a zero row.
    """
    if mode not in ("labeled", "all"):
        raise ValueError("mode must be 'labeled' or 'all'")
    lab = smap.assignment.ravel()[train.indices]
    if train.labels.size and (train.labels.min() < 1 or train.labels.max() > num_classes):
        raise ValueError("training labels out of range")
    Y = np.zeros((smap.count, num_classes))
    np.add.at(Y, (lab, train.labels - 1), 1.0)
    denom = Y.sum(1) if mode == "labeled" else smap.sizes().astype(float)
    nz = denom > 0
    Y[nz] /= denom[nz, None]
    return Y


def normalized_affinity(graph: WeightedGraph) -> sp.csr_matrix:
    """D^-1/2 W D^-1/2 with zero rows/columns for isolated nodes."""
    d = graph.degrees
    inv = np.zeros_like(d)
    pos = d > 0
    inv[pos] = 1.0 / np.sqrt(d[pos])
    Dm = sp.diags(inv)
    return (Dm @ graph.weights @ Dm).tocsr()


def lgc_solve(graph: WeightedGraph, Y: np.ndarray, mu: float, return_info: bool = False):
    """Closed-form LGC scores F = lgc_beta * (I - alpha S)^-1 Y.

    Dense Cholesky up to ``DENSE_LIMIT`` nodes, conjugate gradients beyond.
    """
    Y = np.asarray(Y, dtype=np.float64)
    k = graph.num_nodes
    if Y.shape[0] != k:
        raise ValueError(f"Y has {Y.shape[0]} rows but the graph has {k} nodes")
    if not (Y != 0).any():
        raise ValueError("Y has no labeled rows")
    if mu <= 0:
        raise ValueError("mu must be positive")
    lgc_beta = mu / (1.0 + mu)
    alpha = 1.0 - lgc_beta
    S = normalized_affinity(graph)
    A = sp.identity(k, format="csr") - alpha * S
    B = lgc_beta * Y
    if k <= DENSE_LIMIT:
        try:
            F = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A.toarray()), B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"LGC system is not positive definite: {exc}") from exc
    else:
        F = np.empty_like(B)
        for c in range(B.shape[1]):
            x, status = scipy.sparse.linalg.cg(A, B[:, c], rtol=1e-10, atol=0.0, maxiter=10 * k)
            if status != 0:
                raise NumericalError(f"conjugate gradients did not converge for class column {c}")
            F[:, c] = x
    if not np.isfinite(F).all():
        raise NumericalError("LGC solution contains non-finite values")
    if return_info:
        resid = float(np.abs(A @ F - B).max())
        return F, {"alpha": alpha, "lgc_beta": lgc_beta, "residual": resid}
    return F


def lgc_iterate(graph: WeightedGraph, Y: np.ndarray, mu: float, tol: float = 1e-12,
                max_iter: int = 100000) -> np.ndarray:
    """Fixed point of F <- alpha S F + (1 - alpha) Y by plain iteration."""
    alpha = 1.0 / (1.0 + mu)
    S = normalized_affinity(graph)
    F = np.asarray(Y, dtype=np.float64).copy()
    for _ in range(max_iter):
        nxt = alpha * (S @ F) + (1.0 - alpha) * Y
        if np.abs(nxt - F).max() < tol:
            return nxt
        F = nxt
    return F


def lgc_cost(F: np.ndarray, graph: WeightedGraph, Y: np.ndarray, mu: float) -> float:
    """LGC objective: smoothness over each edge {i, j} once plus mu/2 * ||F - Y||^2.

    Counting every undirected edge once is the normalization under which the
    closed form above is the exact minimizer. An isolated node contributes
    ``||F_i||^2 / 2`` in place of its (empty) smoothness sum, matching the
    quadratic form F^T (I - S) F / 2 the solver uses.
    """
    d = graph.degrees
    inv = np.zeros_like(d)
    inv[d > 0] = 1.0 / np.sqrt(d[d > 0])
    G = F * inv[:, None]
    W = sp.triu(graph.weights, k=1).tocoo()
    diff = G[W.row] - G[W.col]
    smooth = 0.5 * float((W.data * (diff ** 2).sum(1)).sum())
    smooth += 0.5 * float((F[d <= 0] ** 2).sum())
    fit = 0.5 * mu * float(((F - Y) ** 2).sum())
    return smooth + fit


def assign_labels(F: np.ndarray) -> np.ndarray:
    """1-based argmax per row; ties to the lowest class; all-zero rows get
    ``UNCLASSIFIED`` (0)."""
    F = np.asarray(F)
    if not np.isfinite(F).all():
        raise NumericalError("scores contain non-finite values")
    out = np.argmax(F, axis=1) + 1
    out[~(F != 0).any(axis=1)] = UNCLASSIFIED
    return out


def project_to_pixels(smap: SuperpixelMap, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (smap.count,):
        raise ValueError(f"expected {smap.count} superpixel labels, got {labels.shape}")
    return labels[smap.assignment]

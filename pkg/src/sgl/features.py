"""Per-superpixel features: mean spectra, neighbour-weighted spectra and centroids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dimred import ReducedImage
from .superpixel import SuperpixelMap

__all__ = [
    "SuperpixelFeatures",
    "mean_features",
    "weighted_features",
    "neighbour_weights",
    "centroids",
    "extract_features",
]


@dataclass(frozen=True)
class SuperpixelFeatures:
    """Rows are superpixels. ``centroid`` columns are (x, y) in pixel units."""

    mean: np.ndarray
    weighted: np.ndarray
    centroid: np.ndarray
    h: float = 15.0

    @property
    def count(self) -> int:
        return self.mean.shape[0]


def mean_features(smap: SuperpixelMap, img: ReducedImage) -> np.ndarray:
    """Average reduced spectrum of each superpixel, shape (K, A)."""
    if smap.shape != (img.height, img.width):
        raise ValueError("superpixel map does not match image size")
    lab = smap.assignment.ravel()
    X = img.flat().astype(np.float64)
    sums = np.zeros((smap.count, X.shape[1]))
    np.add.at(sums, lab, X)
    return sums / smap.sizes()[:, None]


def neighbour_weights(smap: SuperpixelMap, means: np.ndarray, h: float):
    """Normalized weights w_{i,z} over each superpixel's neighbours.

    Returns ``(src, dst, w)`` arrays: for every ordered adjacent pair, the
    weight neighbour ``dst`` receives in the feature of ``src``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    e = smap.edges()
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    k = smap.count
    empty = np.flatnonzero(np.bincount(src, minlength=k) == 0)
    if len(empty):
        raise ValueError(f"superpixel {int(empty[0])} has no adjacent superpixels")
    score = -((means[dst] - means[src]) ** 2).sum(1) / h
    top = np.full(k, -np.inf)
    np.maximum.at(top, src, score)
    ex = np.exp(score - top[src])
    total = np.zeros(k)
    np.add.at(total, src, ex)
    return src, dst, ex / total[src]


def weighted_features(smap: SuperpixelMap, means: np.ndarray, h: float = 15.0) -> np.ndarray:
    """Similarity-weighted average of the neighbouring superpixels' means."""
    src, dst, w = neighbour_weights(smap, means, h)
    out = np.zeros_like(means, dtype=np.float64)
    np.add.at(out, src, w[:, None] * means[dst])
    return out


def centroids(smap: SuperpixelMap) -> np.ndarray:
    """Mean (x, y) pixel coordinate of each superpixel, shape (K, 2)."""
    H, W = smap.shape
    ys, xs = np.divmod(np.arange(H * W), W)
    lab = smap.assignment.ravel()
    n = smap.sizes()
    cx = np.bincount(lab, weights=xs, minlength=smap.count) / n
    cy = np.bincount(lab, weights=ys, minlength=smap.count) / n
    return np.stack([cx, cy], axis=1)


def extract_features(smap: SuperpixelMap, img: ReducedImage, h: float = 15.0) -> SuperpixelFeatures:
    m = mean_features(smap, img)
    return SuperpixelFeatures(m, weighted_features(smap, m, h), centroids(smap), h)

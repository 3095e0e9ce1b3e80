"""PCA reduction of the spectral axis with an explained-variance stopping rule."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import HyperspectralCube
from .errors import DataError

__all__ = ["PcaModel", "ReducedImage", "pca_fit", "pca_reduce"]

ZERO_VARIANCE = "zero-variance"


@dataclass(frozen=True)
class PcaModel:
    """Fitted projection.

    Attributes
    ----------
    mean : (B,) array
    components : (A, B) array
        Orthonormal rows, ordered by decreasing eigenvalue.
    eigenvalues : (A,) array
    explained_variance_ratio : (A,) array
    scale : (B,) array or None
        Per-band standard deviation when fitted with ``standardize=True``.
    warning : str or None
        ``"zero-variance"`` when the data had no variance at all.
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    threshold: float
    scale: np.ndarray | None = None
    warning: str | None = None

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class ReducedImage:
    """PCA scores stored as ``data[y, x, a]``."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dims(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1, self.dims)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # columns of vecs are eigenvectors; make the largest-magnitude entry positive
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def pca_fit(cube: HyperspectralCube, variance_threshold: float = 0.999,
            standardize: bool = False) -> PcaModel:
    """Eigen-decompose the band covariance and keep the smallest leading set
    of components whose cumulative explained-variance ratio reaches
    ``variance_threshold``."""
    if not 0 < variance_threshold <= 1:
        raise ValueError("variance_threshold must lie in (0, 1]")
    X = cube.spectra().astype(np.float64)
    n, b = X.shape
    if n < 2:
        raise DataError("PCA needs at least 2 pixels")
    mean = X.mean(axis=0)
    Xc = X - mean
    scale = None
    if standardize:
        scale = Xc.std(axis=0, ddof=1)
        scale[scale == 0] = 1.0
        Xc = Xc / scale
    cov = Xc.T @ Xc / (n - 1)
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = _fix_signs(vecs[:, order])

    total = vals.sum()
    if total <= 0:
        warnings.warn("data has zero variance; keeping a single component", RuntimeWarning)
        return PcaModel(mean, vecs[:, :1].T.copy(), vals[:1], np.array([1.0]),
                        variance_threshold, scale, ZERO_VARIANCE)
    ratio = vals / total
    cum = np.cumsum(ratio)
    # rounding can leave the full sum a hair under 1
    cum[-1] = max(cum[-1], 1.0)
    k = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
    k = min(k, b)
    return PcaModel(mean, vecs[:, :k].T.copy(), vals[:k], ratio[:k], variance_threshold, scale)


def pca_reduce(cube: HyperspectralCube, model: PcaModel) -> ReducedImage:
    if cube.bands != model.mean.shape[0]:
        raise DataError(f"cube has {cube.bands} bands but the model expects {model.mean.shape[0]}")
    X = cube.spectra().astype(np.float64) - model.mean
    if model.scale is not None:
        X = X / model.scale
    scores = X @ model.components.T
    return ReducedImage(scores.reshape(cube.height, cube.width, -1))

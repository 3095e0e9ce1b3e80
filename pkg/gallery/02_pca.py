"""Reduce a cube with PCA and watch how many components the variance rule keeps.

Data lying in a three-dimensional subspace keeps exactly three components
at the default 0.999 threshold, whatever the number of bands.
"""
import numpy as np

from sgl import HyperspectralCube, pca_fit, pca_reduce

rng = np.random.default_rng(0)
basis = rng.normal(size=(3, 50))
data = (rng.normal(size=(32 * 32, 3)) @ basis).reshape(32, 32, 50)
cube = HyperspectralCube(data)

for threshold in (0.9, 0.99, 0.999):
    model = pca_fit(cube, threshold)
    print(f"threshold {threshold}: {model.n_components} components, "
          f"explained {model.explained_variance_ratio.sum():.6f}")

img = pca_reduce(cube, pca_fit(cube))
print("reduced image shape:", img.data.shape)
print("component means ~ 0:", np.allclose(img.data.reshape(-1, img.data.shape[-1]).mean(0), 0))

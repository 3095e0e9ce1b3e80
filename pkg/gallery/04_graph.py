"""From superpixels to a graph: features, neighbours and edge weights.

Each superpixel gets a mean spectrum, a neighbour-weighted spectrum and a
centroid. The kNN graph keeps an edge when either end lists the other
among its nearest neighbours.
"""
import numpy as np

from sgl import (GraphConfig, HmsConfig, build_knn_graph, compute_covariance_field, extract_features,
                 generate_synthetic_scene, hms_segment, make_scene_spec, pca_fit, pca_reduce)

cube, gt = generate_synthetic_scene(make_scene_spec(48, 48, 12, 3, noise_factor=0.1, tiles=(1, 3), seed=2))
img = pca_reduce(cube, pca_fit(cube))
cfg = HmsConfig(k_init=60)
smap = hms_segment(img, compute_covariance_field(img, cfg), cfg)

feats = extract_features(smap, img, h=15.0)
graph = build_knn_graph(feats, GraphConfig(k_nn=6, sigma_l=20.0))
W = graph.weights.tocoo()
print(f"{smap.count} nodes, {W.nnz // 2} edges")
degrees = np.diff(graph.weights.tocsr().indptr)
print("degree range:", degrees.min(), degrees.max())

# edges mostly join superpixels of the same class
major = np.array([np.bincount(gt.labels[smap.assignment == i]).argmax() for i in range(smap.count)])
same = major[W.row] == major[W.col]
print(f"weight share on same-class edges: {W.data[same].sum() / W.data.sum():.3f}")

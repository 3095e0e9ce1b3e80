"""Superpixel-contracted graph semi-supervised classification of
hyperspectral images.

The pipeline reduces a cube with PCA, segments it into Hyper-Manifold SLIC
superpixels, builds a weighted kNN graph over superpixel features and
propagates a handful of labels with Local and Global Consistency.
"""
from .core import (GroundTruth, HyperspectralCube, SyntheticSceneSpec, TrainingSet,
                   generate_synthetic_scene, load_cube, load_raster, make_scene_spec,
                   sample_training_pixels, save_cube, save_ground_truth, save_raster)
from .dimred import PcaModel, ReducedImage, pca_fit, pca_reduce
from .errors import DataError, NumericalError, StageError
from .features import SuperpixelFeatures, centroids, extract_features, mean_features, weighted_features
from .graph import (GraphConfig, WeightedGraph, assign_labels, build_knn_graph, lgc_cost, lgc_iterate,
                    lgc_solve, lift_labels, pair_weight, project_to_pixels)
from .metrics import MetricsReport, compute_metrics, confusion_matrix
from .pipeline import PRESETS, PipelineResult, RunConfig, run_pipeline, sweep_k, sweep_to_csv
from .render import boundary_overlay, default_palette, render_map
from .superpixel import (CovarianceField, HmsConfig, SuperpixelMap, compute_covariance_field,
                         enforce_connectivity, hms_segment, pixel_to_seed_distance, spectral_merge)

__version__ = "0.1.0"

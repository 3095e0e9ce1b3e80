"""End-to-end classification: PCA -> covariance field -> HMS -> features ->
kNN graph -> LGC -> pixel map -> metrics, plus the K sensitivity sweep."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .core import GroundTruth, HyperspectralCube, TrainingSet, sample_training_pixels
from .dimred import PcaModel, pca_fit, pca_reduce
from .errors import DataError, StageError
from .features import extract_features
from .graph import (GraphConfig, assign_labels, build_knn_graph, lgc_solve, lift_labels,
                    project_to_pixels, UNCLASSIFIED)
from .metrics import MetricsReport, compute_metrics
from .superpixel import HmsConfig, SuperpixelMap, compute_covariance_field, hms_segment

__all__ = ["RunConfig", "PRESETS", "PipelineResult", "run_pipeline", "sweep_k", "sweep_to_csv",
           "normalize_cube", "thread_count"]

# per-dataset defaults; with mu_jitter, mu and sigma_l are drawn uniformly from these ranges
MU_RANGE = (0.10, 0.15)
PRESETS = {
    "indian_pines": {"kernel_beta": 0.9, "sigma_l": 0.45, "sigma_l_range": (0.4, 0.5), "k": 1200},
    "salinas": {"kernel_beta": 0.9, "sigma_l": 3.6, "sigma_l_range": (3.2, 4.0), "k": 1400},
    "pavia_university": {"kernel_beta": 0.1, "sigma_l": 18.5, "sigma_l_range": (17.0, 20.0), "k": 2400},
}


@dataclass(frozen=True)
class RunConfig:
    hms: HmsConfig = field(default_factory=HmsConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    h: float = 15.0
    pca_threshold: float = 0.999
    pca_standardize: bool = False
    normalize: str = "none"
    per_class: int = 10
    seed: int = 0
    label_lift: str = "labeled"
    eval_include_train: bool = False
    mu_jitter: bool = False
    preset: str | None = None

    def __post_init__(self):
        if self.normalize not in ("none", "minmax"):
            raise ValueError("normalize must be 'none' or 'minmax'")
        if self.label_lift not in ("labeled", "all"):
            raise ValueError("label_lift must be 'labeled' or 'all'")
        if not 0 < self.pca_threshold <= 1:
            raise ValueError("pca_threshold must lie in (0, 1]")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "RunConfig":
        try:
            p = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        cfg = cls(hms=HmsConfig(k_init=p["k"]),
                  graph=GraphConfig(kernel_beta=p["kernel_beta"], sigma_l=p["sigma_l"]),
                  normalize="minmax", preset=name)
        return cfg.with_overrides(**overrides)

    def with_overrides(self, **kw) -> "RunConfig":
        """Replace fields by name; HMS and graph fields are routed to their sub-configs."""
        hms_names = {f.name for f in fields(HmsConfig)}
        graph_names = {f.name for f in fields(GraphConfig)}
        hms_kw = {k: kw.pop(k) for k in list(kw) if k in hms_names}
        graph_kw = {k: kw.pop(k) for k in list(kw) if k in graph_names}
        return replace(self, hms=replace(self.hms, **hms_kw), graph=replace(self.graph, **graph_kw), **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        hms = HmsConfig(**d.pop("hms", {}))
        graph = GraphConfig(**d.pop("graph", {}))
        return cls(hms=hms, graph=graph, **d)


@dataclass
class PipelineResult:
    prediction: np.ndarray
    superpixels: SuperpixelMap
    scores: np.ndarray
    train: TrainingSet | None
    metrics: MetricsReport | None
    report: dict


def normalize_cube(cube: HyperspectralCube) -> HyperspectralCube:
    """Global min-max scaling to [0, 1]."""
    lo, hi = float(cube.data.min()), float(cube.data.max())
    span = hi - lo if hi > lo else 1.0
    return HyperspectralCube((cube.data.astype(np.float64) - lo) / span, cube.band_names)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SGL_THREADS", "1")))
    except ValueError:
        return 1


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _effective_graph_cfg(cfg: RunConfig) -> GraphConfig:
    if not cfg.mu_jitter:
        return cfg.graph
    rng = np.random.default_rng([cfg.seed, 7919])
    mu = float(rng.uniform(*MU_RANGE))
    sigma_l = cfg.graph.sigma_l
    if cfg.preset in PRESETS:
        sigma_l = float(rng.uniform(*PRESETS[cfg.preset]["sigma_l_range"]))
    return replace(cfg.graph, mu=mu, sigma_l=sigma_l)


def run_pipeline(cfg: RunConfig, cube: HyperspectralCube, gt: GroundTruth | None = None,
                 train: TrainingSet | None = None) -> PipelineResult:
    """Classify every pixel of ``cube``.

    Training pixels are drawn from ``gt`` with ``cfg.seed`` unless ``train``
    is given. BLAS is pinned to one thread so results do not depend on the
    machine's thread count.
    """
    with threadpool_limits(limits=1):
        return _run(cfg, cube, gt, train)


def _run(cfg, cube, gt, train):
    if gt is not None and gt.labels.shape != (cube.height, cube.width):
        raise StageError("load", DataError("ground truth dimensions do not match cube"))
    if train is None:
        if gt is None:
            raise StageError("sample", DataError("need ground truth or an explicit training set"))
        train = _stage("sample", sample_training_pixels, gt, cfg.per_class, cfg.seed)
    num_classes = gt.num_classes if gt is not None else int(train.labels.max())

    if cfg.normalize == "minmax":
        cube = normalize_cube(cube)
    model: PcaModel = _stage("pca", pca_fit, cube, cfg.pca_threshold, cfg.pca_standardize)
    img = _stage("pca", pca_reduce, cube, model)
    fieldc = _stage("covariance", compute_covariance_field, img, cfg.hms)
    smap = _stage("segment", hms_segment, img, fieldc, cfg.hms)
    feats = _stage("features", extract_features, smap, img, cfg.h)
    gcfg = _effective_graph_cfg(cfg)
    graph = _stage("graph", build_knn_graph, feats, gcfg)
    Y = _stage("lift", lift_labels, smap, train, num_classes, cfg.label_lift)
    F, solve_info = _stage("solve", lgc_solve, graph, Y, gcfg.mu, return_info=True)
    sp_labels = assign_labels(F)
    pred = project_to_pixels(smap, sp_labels)

    metrics = None
    if gt is not None:
        metrics = _stage("metrics", compute_metrics, pred, gt, train, cfg.eval_include_train)

    report = {
        "config": cfg.to_dict(),
        "image": {"width": cube.width, "height": cube.height, "bands": cube.bands},
        "pca": {"components": model.n_components,
                "explained_variance": float(model.explained_variance_ratio.sum()),
                "warning": model.warning},
        "superpixels": {"k_init": cfg.hms.k_init, "count": smap.count,
                        "iterations": smap.info.get("iterations"),
                        "energy": smap.info.get("energy")},
        "graph": {"edges": int(graph.weights.nnz // 2), "mu": gcfg.mu, "sigma_l": gcfg.sigma_l},
        "solver": solve_info,
        "training_pixels": int(train.indices.size),
        "unclassified_superpixels": int((sp_labels == UNCLASSIFIED).sum()),
        "metrics": metrics.to_dict() if metrics is not None else None,
    }
    return PipelineResult(pred, smap, F, train, metrics, report)


def _sweep_job(args):
    cfg, cube, gt = args
    res = run_pipeline(cfg, cube, gt)
    return res.metrics.oa


def sweep_k(cfg: RunConfig, cube: HyperspectralCube, gt: GroundTruth, k_values, repetitions: int = 10,
            seeds=None) -> list[dict]:
    """Mean and standard deviation of OA over repeated runs for each K.

    Repetition ``r`` uses seed ``seeds[r]`` (default ``cfg.seed + r``) for a
    fresh training draw. Jobs run in up to ``SGL_THREADS`` processes.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    seeds = list(seeds) if seeds is not None else [cfg.seed + r for r in range(repetitions)]
    if len(seeds) != repetitions:
        raise ValueError("need one seed per repetition")
    jobs = [(replace(cfg, hms=replace(cfg.hms, k_init=int(k)), seed=int(s)), cube, gt)
            for k in k_values for s in seeds]
    workers = min(thread_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            oas = list(ex.map(_sweep_job, jobs))
    else:
        oas = [_sweep_job(j) for j in jobs]
    rows = []
    for i, k in enumerate(k_values):
        vals = np.array(oas[i * repetitions:(i + 1) * repetitions])
        rows.append({"k": int(k), "mean_oa": float(vals.mean()), "std_oa": float(vals.std()),
                     "repetitions": repetitions, "oa": [float(v) for v in vals]})
    return rows


def sweep_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mean_oa", "std_oa", "repetitions"])
    for r in rows:
        w.writerow([r["k"], repr(r["mean_oa"]), repr(r["std_oa"]), r["repetitions"]])
    return buf.getvalue()

"""Hyperspectral data model, raw-file ingestion, training-sample selection
and a synthetic scene generator.

Arrays are stored row-major as ``data[y, x, b]``; a pixel coordinate is
written ``(x, y)`` with ``x`` the column and ``y`` the row.

On-disk format
--------------
A JSON header describes a band-sequential (BSQ) payload of little-endian
float32 values::

    {"width": 145, "height": 145, "bands": 200, "dtype": "f32le",
     "layout": "bsq", "data_file": "cube.raw",
     "gt_file": "gt.raw", "num_classes": 16, "exclude_bands": [103, 104]}

``gt_file`` holds one little-endian uint16 label per pixel (row-major);
0 marks unlabeled pixels. Relative file names resolve against the header's
directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "HyperspectralCube",
    "GroundTruth",
    "TrainingSet",
    "SyntheticSceneSpec",
    "load_cube",
    "save_cube",
    "save_ground_truth",
    "save_raster",
    "load_raster",
    "sample_training_pixels",
    "generate_synthetic_scene",
    "make_scene_spec",
]


@dataclass(frozen=True)
class HyperspectralCube:
    """A W x H x B reflectance raster, stored as ``data[y, x, b]``."""

    data: np.ndarray
    band_names: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise DataError(f"cube data must be 3-D (height, width, bands), got shape {data.shape}")
        if min(data.shape) < 1:
            raise DataError(f"cube dimensions must be >= 1, got {data.shape}")
        bad = ~np.isfinite(data)
        if bad.any():
            y, x, b = np.argwhere(bad)[0]
            raise DataError(
                f"non-finite value at (x={x}, y={y}, band={b}); {int(bad.sum())} non-finite values in total"
            )
        if self.band_names is not None and len(self.band_names) != data.shape[2]:
            raise DataError("band_names length does not match band count")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def value(self, x: int, y: int, b: int) -> float:
        return float(self.data[y, x, b])

    def spectra(self) -> np.ndarray:
        """Pixels as rows, shape (n_pixels, bands), raster order."""
        return self.data.reshape(-1, self.bands)

    def select_bands(self, keep) -> "HyperspectralCube":
        keep = np.asarray(keep, dtype=int)
        names = None if self.band_names is None else tuple(self.band_names[i] for i in keep)
        return HyperspectralCube(self.data[:, :, keep], names)


@dataclass(frozen=True)
class GroundTruth:
    """Per-pixel class labels; 0 is unlabeled, classes are 1..num_classes."""

    labels: np.ndarray
    num_classes: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DataError(f"ground truth must be 2-D, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise DataError("ground truth labels must be non-negative")
        labels = labels.astype(np.int64)
        top = int(labels.max()) if labels.size else 0
        nc = top if self.num_classes is None else int(self.num_classes)
        if top > nc:
            raise DataError(f"label {top} exceeds num_classes={nc}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", nc)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def class_counts(self) -> np.ndarray:
        """Labeled-pixel count per class, index 0 -> class 1."""
        return np.bincount(self.labels.ravel(), minlength=self.num_classes + 1)[1:]


@dataclass(frozen=True)
class TrainingSet:
    """Randomly drawn labeled pixels.

    ``indices`` are flat raster indices (``y * width + x``) and ``labels`` the
    matching 1-based classes, grouped by class in ascending order.
    """

    indices: np.ndarray
    labels: np.ndarray
    shape: tuple[int, int]
    per_class: int
    rng_seed: int

    @property
    def coords(self) -> np.ndarray:
        """(x, y) pairs, shape (n, 2)."""
        y, x = np.divmod(self.indices, self.shape[1])
        return np.stack([x, y], axis=1)

    @property
    def samples(self) -> list[tuple[tuple[int, int], int]]:
        return [((int(x), int(y)), int(c)) for (x, y), c in zip(self.coords, self.labels)]

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        m[self.indices] = True
        return m.reshape(self.shape)

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "per_class": self.per_class,
            "rng_seed": self.rng_seed,
            "samples": [[x, y, c] for (x, y), c in self.samples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingSet":
        h, w = d["shape"]
        s = np.asarray(d["samples"], dtype=np.int64).reshape(-1, 3)
        return cls(s[:, 1] * w + s[:, 0], s[:, 2], (h, w), int(d["per_class"]), int(d["rng_seed"]))


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def _read_raw(path: Path, dtype: str, count: int) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing file: {path}")
    raw = path.read_bytes()
    itemsize = np.dtype(dtype).itemsize
    if len(raw) != count * itemsize:
        raise DataError(
            f"payload length mismatch for {path.name}: expected {count * itemsize} bytes, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype=dtype).copy()


def load_cube(header_path) -> tuple[HyperspectralCube, GroundTruth | None]:
    """Read a cube (and its ground truth when the header declares one).

    Bands listed in ``exclude_bands`` are dropped after reading.
    """
    header_path = Path(header_path)
    if not header_path.exists():
        raise DataError(f"missing file: {header_path}")
    try:
        hdr = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed header {header_path}: {exc}") from exc
    for key in ("width", "height", "bands", "data_file"):
        if key not in hdr:
            raise DataError(f"header missing required field {key!r}")
    if hdr.get("dtype", "f32le") != "f32le":
        raise DataError(f"unsupported dtype {hdr['dtype']!r}; only 'f32le' is supported")
    if hdr.get("layout", "bsq") != "bsq":
        raise DataError(f"unsupported layout {hdr['layout']!r}; only 'bsq' is supported")
    w, h, b = int(hdr["width"]), int(hdr["height"]), int(hdr["bands"])
    if min(w, h, b) < 1:
        raise DataError("width, height and bands must all be >= 1")

    base = header_path.parent
    flat = _read_raw(_resolve(base, hdr["data_file"]), "<f4", w * h * b)
    data = flat.reshape(b, h, w).transpose(1, 2, 0)
    names = hdr.get("band_names")
    cube = HyperspectralCube(data, tuple(names) if names is not None else None)
    exclude = hdr.get("exclude_bands") or []
    if exclude:
        if any(not 0 <= i < b for i in exclude):
            raise DataError("exclude_bands index out of range")
        cube = cube.select_bands([i for i in range(b) if i not in set(exclude)])

    gt = None
    if hdr.get("gt_file"):
        labels = _read_raw(_resolve(base, hdr["gt_file"]), "<u2", w * h).reshape(h, w)
        gt = GroundTruth(labels, hdr.get("num_classes"))
    return cube, gt


def save_cube(header_path, cube: HyperspectralCube, gt: GroundTruth | None = None,
              exclude_bands=None) -> Path:
    """Write ``cube`` (and ``gt``) next to a JSON header. Returns the header path."""
    header_path = Path(header_path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    stem = header_path.stem
    data_name = f"{stem}.raw"
    payload = np.ascontiguousarray(cube.data.transpose(2, 0, 1), dtype="<f4")
    (header_path.parent / data_name).write_bytes(payload.tobytes())
    hdr = {
        "width": cube.width,
        "height": cube.height,
        "bands": cube.bands,
        "dtype": "f32le",
        "layout": "bsq",
        "data_file": data_name,
    }
    if gt is not None:
        if gt.labels.shape != (cube.height, cube.width):
            raise DataError("ground truth dimensions do not match cube")
        hdr["gt_file"] = save_ground_truth(header_path.parent / f"{stem}_gt.raw", gt).name
        hdr["num_classes"] = gt.num_classes
    if exclude_bands:
        hdr["exclude_bands"] = [int(i) for i in exclude_bands]
    if cube.band_names is not None:
        hdr["band_names"] = list(cube.band_names)
    header_path.write_text(json.dumps(hdr, indent=2))
    return header_path


def save_ground_truth(path, gt: GroundTruth) -> Path:
    path = Path(path)
    if gt.labels.size and gt.labels.max() > np.iinfo(np.uint16).max:
        raise DataError("labels do not fit in uint16")
    path.write_bytes(np.ascontiguousarray(gt.labels, dtype="<u2").tobytes())
    return path


_RASTER_TYPES = {"u16le": "<u2", "u32le": "<u4"}


def save_raster(header_path, values: np.ndarray, dtype: str = "u16le", **extra) -> Path:
    """Write a 2-D integer raster as raw little-endian values plus a JSON header.

    Used for class maps (``u16le``) and superpixel assignments (``u32le``).
    ``extra`` entries are copied into the header.
    """
    if dtype not in _RASTER_TYPES:
        raise ValueError(f"dtype must be one of {sorted(_RASTER_TYPES)}")
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("raster must be 2-D")
    info = np.iinfo(np.dtype(_RASTER_TYPES[dtype]))
    if values.size and (values.min() < 0 or values.max() > info.max):
        raise DataError(f"raster values do not fit in {dtype}")
    header_path = Path(header_path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    data_name = f"{header_path.stem}.raw"
    (header_path.parent / data_name).write_bytes(
        np.ascontiguousarray(values, dtype=_RASTER_TYPES[dtype]).tobytes())
    hdr = {"width": int(values.shape[1]), "height": int(values.shape[0]), "dtype": dtype,
           "data_file": data_name}
    hdr.update(extra)
    header_path.write_text(json.dumps(hdr, indent=2, sort_keys=True) + "\n")
    return header_path


def load_raster(header_path) -> tuple[np.ndarray, dict]:
    """Read a raster written by :func:`save_raster`; returns (values, header)."""
    header_path = Path(header_path)
    if not header_path.exists():
        raise DataError(f"missing file: {header_path}")
    try:
        hdr = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed header {header_path}: {exc}") from exc
    try:
        w, h, dtype = int(hdr["width"]), int(hdr["height"]), _RASTER_TYPES[hdr["dtype"]]
        name = hdr["data_file"]
    except KeyError as exc:
        raise DataError(f"raster header lacks or misdeclares {exc}") from exc
    vals = _read_raw(_resolve(header_path.parent, name), dtype, w * h).reshape(h, w)
    return vals.astype(np.int64), hdr


def sample_training_pixels(gt: GroundTruth, per_class: int, seed: int) -> TrainingSet:
    """Draw up to ``per_class`` pixels uniformly without replacement from each class.

    Classes with fewer labeled pixels than requested contribute all of them.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    flat = gt.labels.ravel()
    if not (flat > 0).any():
        raise DataError("ground truth has no labeled pixels")
    rng = np.random.default_rng(seed)
    idx, lab = [], []
    for c in range(1, gt.num_classes + 1):
        members = np.flatnonzero(flat == c)
        if members.size == 0:
            continue
        take = min(per_class, members.size)
        chosen = np.sort(rng.choice(members, size=take, replace=False))
        idx.append(chosen)
        lab.append(np.full(take, c, dtype=np.int64))
    return TrainingSet(np.concatenate(idx), np.concatenate(lab), gt.labels.shape, per_class, seed)


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Piecewise-constant scene on a rectangular tiling plus Gaussian noise.

    The image is cut into ``tiles = (rows, cols)`` equal-ish rectangles;
    ``tile_classes`` gives the 1-based class of each tile in row-major order.
    """

    width: int
    height: int
    bands: int
    num_classes: int
    class_spectra: np.ndarray
    noise_sigma: float = 0.0
    tiles: tuple[int, int] = (2, 2)
    tile_classes: tuple[int, ...] | None = None
    rng_seed: int = 0

    def __post_init__(self):
        spectra = np.asarray(self.class_spectra, dtype=float)
        if spectra.shape != (self.num_classes, self.bands):
            raise ValueError(f"class_spectra must have shape ({self.num_classes}, {self.bands})")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.num_classes > 1 and self.min_separation <= 0:
            raise ValueError("class spectra must be pairwise distinct")
        rows, cols = self.tiles
        if rows > self.height or cols > self.width:
            raise ValueError("more tiles than pixels along an axis")
        tc = self.tile_classes
        if tc is None:
            tc = tuple((r + 2 * c) % self.num_classes + 1 for r in range(rows) for c in range(cols))
        if len(tc) != rows * cols or min(tc) < 1 or max(tc) > self.num_classes:
            raise ValueError("tile_classes must give a class in 1..num_classes for every tile")
        object.__setattr__(self, "class_spectra", spectra)
        object.__setattr__(self, "tile_classes", tuple(int(c) for c in tc))

    @property
    def min_separation(self) -> float:
        s = self.class_spectra
        d = np.sqrt(((s[:, None, :] - s[None, :, :]) ** 2).sum(-1))
        return float(d[np.triu_indices(len(s), 1)].min()) if len(s) > 1 else float("inf")

    def label_image(self) -> np.ndarray:
        rows, cols = self.tiles
        ry = np.minimum(np.arange(self.height) * rows // self.height, rows - 1)
        cx = np.minimum(np.arange(self.width) * cols // self.width, cols - 1)
        table = np.asarray(self.tile_classes).reshape(rows, cols)
        return table[ry[:, None], cx[None, :]]


def make_scene_spec(width=64, height=64, bands=20, num_classes=4, noise_factor=0.0,
                    tiles=(2, 2), tile_classes=None, seed=0, scale=1.0) -> SyntheticSceneSpec:
    """Build a scene spec with smooth random class spectra in [0.1, 0.9] * ``scale``.

    ``noise_factor`` sets ``noise_sigma`` as a fraction of the minimum
    pairwise class-spectrum separation. ``scale=100`` gives spectra in
    percent reflectance.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((num_classes, bands))
    for k in range(num_classes):
        centers = rng.uniform(0, 1, 3)
        widths = rng.uniform(0.08, 0.3, 3)
        amps = rng.uniform(0.2, 1.0, 3)
        curve = (amps[:, None] * np.exp(-((grid[None] - centers[:, None]) / widths[:, None]) ** 2)).sum(0)
        spectra[k] = scale * (0.1 + 0.8 * curve / max(curve.max(), 1e-12))
    spec = SyntheticSceneSpec(width, height, bands, num_classes, spectra, 0.0, tiles, tile_classes, seed)
    if noise_factor:
        spec = SyntheticSceneSpec(width, height, bands, num_classes, spectra,
                                  noise_factor * spec.min_separation, tiles, spec.tile_classes, seed)
    return spec


def generate_synthetic_scene(spec: SyntheticSceneSpec) -> tuple[HyperspectralCube, GroundTruth]:
    labels = spec.label_image()
    present = np.bincount(labels.ravel(), minlength=spec.num_classes + 1)[1:]
    if (present == 0).any():
        missing = [int(c) + 1 for c in np.flatnonzero(present == 0)]
        raise ValueError(f"degenerate layout: classes {missing} are assigned zero pixels")
    data = spec.class_spectra[labels - 1]
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.rng_seed)
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)
    return HyperspectralCube(data), GroundTruth(labels, spec.num_classes)

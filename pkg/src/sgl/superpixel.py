"""Hyper-Manifold SLIC (HMS) superpixels for reduced hyperspectral images.

Pixels are clustered with a three-part distance: the Log-Euclidean distance
between local covariance descriptors, the Euclidean distance between reduced
spectra and a compactness-weighted spatial distance. Seeds are split or
merged according to the area they cover on the image manifold
``(m/S * x, m/S * y, spectrum)``, and the final labelling is made 4-connected
with bounded superpixel sizes.

Symmetric matrices are handled as "half-vectors": the diagonal followed by
``sqrt(2)`` times the strict upper triangle, so the Euclidean norm of a
half-vector equals the Frobenius norm of the matrix.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dimred import ReducedImage

__all__ = [
    "HmsConfig",
    "CovarianceField",
    "SeedState",
    "SuperpixelMap",
    "compute_covariance_field",
    "pixel_to_seed_distance",
    "hms_segment",
    "spectral_merge",
    "enforce_connectivity",
    "sym_to_vec",
    "vec_to_sym",
]


@dataclass(frozen=True)
class HmsConfig:
    k_init: int = 100
    compactness: float = 10.0
    cov_window: int = 5
    cov_regularization: float = 1e-6
    cov_neighbors: int | None = 9
    cov_dims: int | None = None
    max_iters: int = 10
    min_size: int = 8
    max_size_factor: float = 10.0
    energy_decrease_threshold: float = 0.10
    split_factor: float = 2.0
    merge_factor: float = 0.5

    def __post_init__(self):
        if self.k_init < 2:
            raise ValueError("k_init must be >= 2")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")
        if self.cov_window < 3 or self.cov_window % 2 == 0:
            raise ValueError("cov_window must be odd and >= 3")
        if self.cov_neighbors is not None and not 2 <= self.cov_neighbors <= self.cov_window ** 2:
            raise ValueError("cov_neighbors must lie in [2, cov_window**2]")
        if self.cov_regularization < 0:
            raise ValueError("cov_regularization must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def step(self, n_pixels: int) -> float:
        """Grid interval S = sqrt(n / K)."""
        return math.sqrt(n_pixels / self.k_init)

    def max_size(self, n_pixels: int) -> int:
        return int(math.floor(self.max_size_factor * n_pixels / self.k_init))

    def check_image(self, n_pixels: int) -> None:
        if n_pixels / self.k_init < 15:
            raise ValueError(f"n / k_init must be at least 15 (n={n_pixels}, k_init={self.k_init})")
        if self.max_size(n_pixels) < 2 * self.min_size:
            raise ValueError("max superpixel size must be at least twice min_size")


def sym_to_vec(M: np.ndarray) -> np.ndarray:
    """Half-vectorize symmetric matrices along the last two axes."""
    a = M.shape[-1]
    iu = np.triu_indices(a, 1)
    diag = np.diagonal(M, axis1=-2, axis2=-1)
    return np.concatenate([diag, math.sqrt(2.0) * M[..., iu[0], iu[1]]], axis=-1)


def vec_to_sym(v: np.ndarray) -> np.ndarray:
    d = v.shape[-1]
    a = int(round((math.sqrt(8 * d + 1) - 1) / 2))
    iu = np.triu_indices(a, 1)
    M = np.zeros(v.shape[:-1] + (a, a))
    idx = np.arange(a)
    M[..., idx, idx] = v[..., :a]
    off = v[..., a:] / math.sqrt(2.0)
    M[..., iu[0], iu[1]] = off
    M[..., iu[1], iu[0]] = off
    return M


@dataclass(frozen=True)
class CovarianceField:
    """Per-pixel SPD covariance descriptors and their matrix logarithms.

    ``cov`` and ``log_cov`` are half-vector arrays of shape (H, W, A(A+1)/2).
    """

    cov: np.ndarray
    log_cov: np.ndarray
    dims: int
    epsilon: float

    def matrix(self, x: int, y: int) -> np.ndarray:
        return vec_to_sym(self.cov[y, x])

    def log_matrix(self, x: int, y: int) -> np.ndarray:
        return vec_to_sym(self.log_cov[y, x])


def compute_covariance_field(img: ReducedImage, cfg: HmsConfig) -> CovarianceField:
    """Local covariance descriptor of each pixel, plus ``eps * I``.

    With ``cfg.cov_neighbors = t`` the covariance is taken over the ``t``
    pixels of the ``cov_window`` square that are spectrally closest to the
    centre pixel, so a descriptor next to an edge describes the centre's own
    side. With ``cov_neighbors=None`` the whole window is used. The window is
    truncated at the image border. ``eps`` is
    ``cov_regularization`` times the mean per-dimension variance of the whole
    image (or times 1 for a constant image).
    """
    w = cfg.cov_window
    if w > min(img.width, img.height):
        raise ValueError(f"cov_window {w} exceeds image size {img.width}x{img.height}")
    a = img.dims if cfg.cov_dims is None else min(cfg.cov_dims, img.dims)
    X = img.data[:, :, :a].astype(np.float64)
    X = X - X.reshape(-1, a).mean(axis=0)
    H, W = X.shape[:2]

    flat = X.reshape(-1, a)
    level = float((flat ** 2).sum() / max(flat.shape[0] - 1, 1) / a)
    eps = cfg.cov_regularization * (level if level > 0 else 1.0)
    floor = eps if eps > 0 else 1e-12 * (level if level > 0 else 1.0)

    r = w // 2
    if cfg.cov_neighbors is None:
        cnt = _box_sum(np.ones((H, W)), r)
        s1 = _box_sum(X, r)
        outer = X[:, :, :, None] * X[:, :, None, :]
        s2 = _box_sum(outer.reshape(H, W, a * a), r).reshape(H, W, a, a)
        mean = s1 / cnt[..., None]
        C = (s2 - cnt[..., None, None] * mean[..., :, None] * mean[..., None, :]) / (cnt - 1)[..., None, None]
    else:
        C = _nearest_neighbour_cov(X, r, cfg.cov_neighbors)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    C[..., np.arange(a), np.arange(a)] += eps

    vals, vecs = np.linalg.eigh(C)
    vals = np.maximum(vals, floor)
    L = (vecs * np.log(vals)[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return CovarianceField(sym_to_vec(C), sym_to_vec(L), a, eps)


def _nearest_neighbour_cov(X: np.ndarray, r: int, t: int) -> np.ndarray:
    """Covariance of the ``t`` window pixels spectrally closest to the centre."""
    H, W, a = X.shape
    offs = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    P = np.pad(X, ((r, r), (r, r), (0, 0)))
    valid = np.pad(np.ones((H, W), dtype=bool), r)
    out = np.empty((H, W, a, a))
    rows = max(1, int(2e6 // (W * len(offs) * a)))
    for y0 in range(0, H, rows):
        y1 = min(y0 + rows, H)
        win = np.stack([P[y0 + r + dy:y1 + r + dy, r + dx:r + dx + W] for dy, dx in offs], axis=2)
        ok = np.stack([valid[y0 + r + dy:y1 + r + dy, r + dx:r + dx + W] for dy, dx in offs], axis=2)
        d = ((win - X[y0:y1, :, None, :]) ** 2).sum(-1)
        d[~ok] = np.inf
        pick = np.argsort(d, axis=-1, kind="stable")[..., :t]
        sel = np.take_along_axis(win, pick[..., None], axis=2)
        m = np.minimum(ok.sum(-1), t)
        keep = np.arange(t) < m[..., None]
        sel = np.where(keep[..., None], sel, 0.0)
        mean = sel.sum(2) / m[..., None]
        dev = np.where(keep[..., None], sel - mean[:, :, None, :], 0.0)
        out[y0:y1] = np.einsum("hwta,hwtb->hwab", dev, dev) / (m - 1)[..., None, None]
    return out


def _box_sum(arr: np.ndarray, r: int) -> np.ndarray:
    """Sum over the (2r+1)^2 window clipped to the image, via integral images."""
    H, W = arr.shape[:2]
    tail = arr.shape[2:]
    ii = np.zeros((H + 1, W + 1) + tail)
    ii[1:, 1:] = arr.cumsum(0).cumsum(1)
    y0 = np.clip(np.arange(H) - r, 0, H)
    y1 = np.clip(np.arange(H) + r + 1, 0, H)
    x0 = np.clip(np.arange(W) - r, 0, W)
    x1 = np.clip(np.arange(W) + r + 1, 0, W)
    return (ii[y1][:, x1] - ii[y0][:, x1] - ii[y1][:, x0] + ii[y0][:, x0])


@dataclass(frozen=True)
class SeedState:
    """A cluster centre: position ``(x, y)``, mean spectrum, Log-Euclidean
    mean covariance (full matrix) and accumulated manifold area."""

    position: tuple[float, float]
    spectrum: np.ndarray
    log_cov: np.ndarray
    area: float = 0.0


def pixel_to_seed_distance(p, seed: SeedState, field: CovarianceField, img: ReducedImage,
                           cfg: HmsConfig) -> float:
    """Combined HMS distance between pixel ``p = (x, y)`` and ``seed``."""
    x, y = p
    if not (0 <= x < img.width and 0 <= y < img.height):
        raise IndexError(f"pixel {p} outside {img.width}x{img.height} image")
    led = np.linalg.norm(field.log_matrix(x, y) - np.asarray(seed.log_cov))
    spec = np.linalg.norm(img.data[y, x] - np.asarray(seed.spectrum))
    S = cfg.step(img.n_pixels)
    sx, sy = seed.position
    return float(led + spec + cfg.compactness / S * math.hypot(x - sx, y - sy))


def spectral_merge(seed_i: int, neighbors, seeds) -> int:
    """Index of the neighbour whose mean spectrum is closest to seed ``seed_i``'s.

    ``seeds`` is a sequence of mean spectra (or :class:`SeedState`). Ties go to
    the lowest index.
    """
    neighbors = sorted(int(j) for j in neighbors)
    if not neighbors:
        raise ValueError(f"seed {seed_i} has no neighbours to merge with")

    def spec(k):
        s = seeds[k]
        return np.asarray(s.spectrum if isinstance(s, SeedState) else s, dtype=float)

    ref = spec(seed_i)
    best, best_d = neighbors[0], np.inf
    for j in neighbors:
        d = float(np.linalg.norm(spec(j) - ref))
        if d < best_d:
            best, best_d = j, d
    return best


@dataclass(frozen=True)
class SuperpixelMap:
    """Partition of the image into superpixels.

    ``assignment[y, x]`` is the superpixel index; ``adjacency[i]`` lists the
    superpixels 4-adjacent to ``i`` in ascending order.
    """

    assignment: np.ndarray
    adjacency: tuple[np.ndarray, ...]
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_assignment(cls, assignment: np.ndarray, info: dict | None = None) -> "SuperpixelMap":
        assignment = np.asarray(assignment, dtype=np.int64)
        k = int(assignment.max()) + 1
        pairs = _label_pairs(assignment)
        nbrs = [[] for _ in range(k)]
        for i, j in pairs:
            nbrs[i].append(j)
            nbrs[j].append(i)
        adj = tuple(np.array(sorted(n), dtype=np.int64) for n in nbrs)
        assignment = assignment.copy()
        assignment.setflags(write=False)
        return cls(assignment, adj, dict(info or {}))

    @property
    def count(self) -> int:
        return len(self.adjacency)

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignment.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment.ravel(), minlength=self.count)

    @property
    def superpixels(self) -> list[np.ndarray]:
        """Flat raster indices of each superpixel's pixels."""
        flat = self.assignment.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)

    def edges(self) -> np.ndarray:
        """Unique adjacent pairs (i < j), shape (E, 2)."""
        return _label_pairs(self.assignment)


def _label_pairs(assignment: np.ndarray) -> np.ndarray:
    a = assignment
    h = np.stack([a[:, :-1].ravel(), a[:, 1:].ravel()], 1)
    v = np.stack([a[:-1, :].ravel(), a[1:, :].ravel()], 1)
    p = np.concatenate([h, v])
    p = p[p[:, 0] != p[:, 1]]
    p = np.sort(p, axis=1)
    if len(p) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(p, axis=0)


# ---------------------------------------------------------------------------
# segmentation


def _gradient(X: np.ndarray) -> np.ndarray:
    P = np.pad(X, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = P[1:-1, 2:] - P[1:-1, :-2]
    gy = P[2:, 1:-1] - P[:-2, 1:-1]
    return (gx ** 2).sum(-1) + (gy ** 2).sum(-1)


def _area_elements(X: np.ndarray, scale: float) -> np.ndarray:
    """First-order area of the manifold patch at each pixel.

    Embeds pixel (x, y) as (scale*x, scale*y, X[y, x]) and takes the
    parallelogram spanned by the forward differences (backward on the last
    row/column).
    """
    dx = np.empty_like(X)
    dx[:, :-1] = X[:, 1:] - X[:, :-1]
    dx[:, -1:] = dx[:, -2:-1] if X.shape[1] > 1 else 0.0
    dy = np.empty_like(X)
    dy[:-1] = X[1:] - X[:-1]
    dy[-1:] = dy[-2:-1] if X.shape[0] > 1 else 0.0
    s2 = scale * scale
    uu = s2 + (dx ** 2).sum(-1)
    vv = s2 + (dy ** 2).sum(-1)
    uv = (dx * dy).sum(-1)
    return np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))


class _Seeds:
    """Structure-of-arrays seed store used inside the HMS loop."""

    def __init__(self, pos, spec, logc, reach=None):
        self.pos = np.asarray(pos, dtype=float)
        self.spec = np.asarray(spec, dtype=float)
        self.logc = np.asarray(logc, dtype=float)
        # half-extent of the cluster each seed summarizes; widens its search window
        self.reach = np.zeros(len(self.pos)) if reach is None else np.asarray(reach, dtype=float)

    def __len__(self):
        return len(self.pos)


def _init_seeds(X, L, S) -> _Seeds:
    H, W = X.shape[:2]
    nx = max(1, int(round(W / S)))
    ny = max(1, int(round(H / S)))
    grad = _gradient(X)
    pos = []
    for j in range(ny):
        cy = int((j + 0.5) * H / ny)
        for i in range(nx):
            cx = int((i + 0.5) * W / nx)
            by, bx, bg = cy, cx, grad[cy, cx]
            for yy in range(max(cy - 1, 0), min(cy + 2, H)):
                for xx in range(max(cx - 1, 0), min(cx + 2, W)):
                    if grad[yy, xx] < bg:
                        by, bx, bg = yy, xx, grad[yy, xx]
            pos.append((bx, by))
    pos = np.array(pos, dtype=float)
    ix = pos.astype(int)
    return _Seeds(pos, X[ix[:, 1], ix[:, 0]], L[ix[:, 1], ix[:, 0]])


def _window_distance(X, L, seeds, k, y0, y1, x0, x1, spatial):
    led = np.sqrt(((L[y0:y1, x0:x1] - seeds.logc[k]) ** 2).sum(-1))
    spec = np.sqrt(((X[y0:y1, x0:x1] - seeds.spec[k]) ** 2).sum(-1))
    yy = np.arange(y0, y1)[:, None] - seeds.pos[k, 1]
    xx = np.arange(x0, x1)[None, :] - seeds.pos[k, 0]
    return led + spec + spatial * np.sqrt(xx * xx + yy * yy)


def _assign(X, L, seeds: _Seeds, S, spatial):
    H, W = X.shape[:2]
    best = np.full((H, W), np.inf)
    label = np.full((H, W), -1, dtype=np.int64)
    for k in range(len(seeds)):
        sx, sy = seeds.pos[k]
        R = max(S, seeds.reach[k])
        x0, x1 = max(int(math.ceil(sx - R)), 0), min(int(math.floor(sx + R)) + 1, W)
        y0, y1 = max(int(math.ceil(sy - R)), 0), min(int(math.floor(sy + R)) + 1, H)
        if x0 >= x1 or y0 >= y1:
            continue
        D = _window_distance(X, L, seeds, k, y0, y1, x0, x1, spatial)
        sub_best = best[y0:y1, x0:x1]
        upd = D < sub_best
        sub_best[upd] = D[upd]
        label[y0:y1, x0:x1][upd] = k
    miss = np.argwhere(label < 0)
    if len(miss):
        # pixels outside every search window fall back to a global search
        ys, xs = miss[:, 0], miss[:, 1]
        for k in range(len(seeds)):
            led = np.sqrt(((L[ys, xs] - seeds.logc[k]) ** 2).sum(-1))
            spec = np.sqrt(((X[ys, xs] - seeds.spec[k]) ** 2).sum(-1))
            sp = np.hypot(xs - seeds.pos[k, 0], ys - seeds.pos[k, 1])
            D = led + spec + spatial * sp
            upd = D < best[ys, xs]
            best[ys[upd], xs[upd]] = D[upd]
            label[ys[upd], xs[upd]] = k
    return label, best


def _group_sums(labels_flat, values, k):
    """Per-label sums of ``values`` rows with a fixed reduction order."""
    order = np.argsort(labels_flat, kind="stable")
    sl = labels_flat[order]
    counts = np.bincount(sl, minlength=k)
    out = np.zeros((k,) + values.shape[1:])
    nz = np.flatnonzero(counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])[nz]
    out[nz] = np.add.reduceat(values[order], starts, axis=0)
    return out, counts, order


def _update_and_adapt(X, L, area, label, k, cfg: HmsConfig):
    """Recompute seeds as cluster means, then split/merge by manifold area."""
    H, W = label.shape
    flat = label.ravel()
    n = flat.size
    ys, xs = np.divmod(np.arange(n), W)
    stats = np.concatenate([
        np.stack([xs, ys], 1).astype(float),
        X.reshape(n, -1),
        L.reshape(n, -1),
        area.reshape(n, 1),
    ], axis=1)
    # average deviations from the first pixel so that constant data gives exact means
    ref = stats[0].copy()
    ref[:2] = 0.0
    ref[-1] = 0.0
    stats -= ref
    sums, counts, order = _group_sums(flat, stats, k)
    members = np.split(order, np.cumsum(counts)[:-1])
    alive = counts > 0
    a = X.shape[2]

    areas = sums[:, -1]
    mean_area = areas[alive].mean()
    nbrs = [set() for _ in range(k)]
    for i, j in _label_pairs(label):
        nbrs[i].add(int(j))
        nbrs[j].add(int(i))

    # merge low-area seeds into their spectrally closest neighbour
    for i in range(k):
        if not alive[i] or areas[i] >= cfg.merge_factor * mean_area:
            continue
        cand = [j for j in nbrs[i] if alive[j]]
        if not cand:
            continue
        means = {j: sums[j, 2:2 + a] / counts[j] for j in cand}
        means[i] = sums[i, 2:2 + a] / counts[i]
        j = spectral_merge(i, cand, means)
        sums[j] += sums[i]
        counts[j] += counts[i]
        areas[j] = sums[j, -1]
        members[j] = np.concatenate([members[j], members[i]])
        alive[i] = False
        for z in nbrs[i]:
            nbrs[z].discard(i)
            if z != j:
                nbrs[z].add(j)
                nbrs[j].add(z)
        nbrs[j].discard(j)

    keep = [i for i in range(k) if alive[i]]
    new_stats = [sums[i] / counts[i] for i in keep]
    groups = [members[i] for i in keep]
    big = [idx for idx, i in enumerate(keep) if areas[i] > cfg.split_factor * mean_area]
    for idx in big:
        pix = np.sort(members[keep[idx]])
        if len(pix) < 2:
            continue
        side = _two_means(pix, X, W, cfg.compactness / cfg.step(n))
        if side is None:
            continue
        first, second = pix[~side], pix[side]
        new_stats[idx] = stats[first].mean(axis=0)
        new_stats.append(stats[second].mean(axis=0))
        groups[idx] = first
        groups.append(second)

    st = np.array(new_stats) + ref
    reach = np.array([np.abs(stats[g, :2] - st[i, :2]).max() for i, g in enumerate(groups)])
    return _Seeds(st[:, :2], st[:, 2:2 + a], st[:, 2 + a:-1], reach)


def _residual_energy(X, L, label, spatial) -> float:
    """Sum of pixel distances to the mean seed of their own cluster.

    Scoring every assignment against its own cluster means (rather than the
    seeds that produced it) makes successive iterations comparable.
    """
    H, W = label.shape
    flat = label.ravel()
    n = flat.size
    ys, xs = np.divmod(np.arange(n), W)
    pos = np.stack([xs, ys], 1).astype(float)
    Xf = X.reshape(n, -1) - X.reshape(n, -1)[0]
    Lf = L.reshape(n, -1) - L.reshape(n, -1)[0]
    k = int(flat.max()) + 1
    sums, counts, _ = _group_sums(flat, np.concatenate([pos, Xf, Lf], axis=1), k)
    means = sums / np.maximum(counts, 1)[:, None]
    a = Xf.shape[1]
    m = means[flat]
    led = np.sqrt(((Lf - m[:, 2 + a:]) ** 2).sum(1))
    spec = np.sqrt(((Xf - m[:, 2:2 + a]) ** 2).sum(1))
    sp = np.sqrt(((pos - m[:, :2]) ** 2).sum(1))
    return float((led + spec + spatial * sp).sum())


def hms_segment(img: ReducedImage, field: CovarianceField, cfg: HmsConfig) -> SuperpixelMap:
    """Segment ``img`` into 4-connected superpixels.

    The returned map's ``info`` holds ``iterations``, ``energy`` (residual
    energy of the accepted assignment) and ``energy_trace``.
    """
    H, W = img.height, img.width
    n = H * W
    cfg.check_image(n)
    S = cfg.step(n)
    if W < S and H < S:
        raise ValueError("image is smaller than one seed cell")
    X = img.data[:, :, :].astype(np.float64)
    L = field.log_cov
    spatial = cfg.compactness / S
    area = _area_elements(X, spatial)

    seeds = _init_seeds(X, L, S)
    prev_label, prev_energy = None, None
    trace = []
    iterations = 0
    for _ in range(cfg.max_iters):
        label, _ = _assign(X, L, seeds, S, spatial)
        energy = _residual_energy(X, L, label, spatial)
        iterations += 1
        trace.append(energy)
        if prev_energy is not None:
            if energy > prev_energy:
                label, energy = prev_label, prev_energy
                break
            if prev_energy <= 0 or (prev_energy - energy) / prev_energy < cfg.energy_decrease_threshold:
                break
        prev_label, prev_energy = label, energy
        seeds = _update_and_adapt(X, L, area, label, len(seeds), cfg)

    info = {"iterations": iterations, "energy": energy, "energy_trace": trace,
            "seeds": int(len(np.unique(label)))}
    return enforce_connectivity(label, cfg, img, info=info)


# ---------------------------------------------------------------------------
# connectivity enforcement


def _components(assignment: np.ndarray) -> np.ndarray:
    """4-connected components of equal-label regions, numbered by first pixel."""
    H, W = assignment.shape
    idx = np.arange(H * W).reshape(H, W)
    a = assignment
    mh = a[:, :-1] == a[:, 1:]
    mv = a[:-1, :] == a[1:, :]
    rows = np.concatenate([idx[:, :-1][mh], idx[:-1, :][mv]])
    cols = np.concatenate([idx[:, 1:][mh], idx[1:, :][mv]])
    g = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(H * W, H * W))
    _, comp = connected_components(g, directed=False)
    return _relabel_first_seen(comp.reshape(H, W))


def _relabel_first_seen(labels: np.ndarray) -> np.ndarray:
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(uniq))
    lut = np.zeros(int(uniq.max()) + 1, dtype=np.int64)
    lut[uniq] = rank
    return lut[labels]


def enforce_connectivity(assignment, cfg: HmsConfig, img: ReducedImage | None = None,
                         info: dict | None = None) -> SuperpixelMap:
    """Make every superpixel 4-connected with size in [min_size, max_size].

    Components smaller than ``min_size`` are absorbed into the 4-adjacent
    component with the closest mean spectrum; components above
    ``max_size_factor * n / k_init`` are split with a local two-seed
    assignment. Output labels are numbered by first pixel in raster order.
    Without ``img`` the merge criterion falls back to component size.
    """
    assignment = np.asarray(assignment)
    H, W = assignment.shape
    n = H * W
    comp = _components(assignment)
    k = int(comp.max()) + 1
    flat = comp.ravel()

    if img is not None:
        X = img.flat().astype(np.float64)
    else:
        X = np.zeros((n, 1))
    sums, counts, _ = _group_sums(flat, X, k)
    sizes = counts.copy()
    nbrs = [set() for _ in range(k)]
    for i, j in _label_pairs(comp):
        nbrs[i].add(int(j))
        nbrs[j].add(int(i))

    parent = np.arange(k)
    for i in range(k):
        if sizes[i] >= cfg.min_size or not nbrs[i]:
            continue
        if img is not None:
            means = {j: sums[j] / sizes[j] for j in nbrs[i]}
            means[i] = sums[i] / sizes[i]
            j = spectral_merge(i, nbrs[i], means)
        else:
            j = max(sorted(nbrs[i]), key=lambda z: sizes[z])
        parent[i] = j
        sums[j] += sums[i]
        sizes[j] += sizes[i]
        sizes[i] = 0
        for z in nbrs[i]:
            nbrs[z].discard(i)
            if z != j:
                nbrs[z].add(j)
                nbrs[j].add(z)
        nbrs[j].discard(j)
        nbrs[i] = set()

    # resolve merge chains
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    merged = root[comp]

    max_size = cfg.max_size(n)
    sizes = np.bincount(merged.ravel(), minlength=k)
    if (sizes > max_size).any():
        merged = _split_large(merged, sizes, max_size, cfg, X, W)

    final = _relabel_first_seen(merged)
    return SuperpixelMap.from_assignment(final, info)


def _split_large(labels, sizes, max_size, cfg, X, W):
    out = labels.ravel().copy()
    next_label = int(out.max()) + 1
    spatial = cfg.compactness / cfg.step(out.size)
    order = np.argsort(out, kind="stable")
    groups = np.split(order, np.cumsum(sizes)[:-1])
    for lab in np.flatnonzero(sizes > max_size):
        parts = _split_region(np.sort(groups[lab]), max_size, cfg.min_size, X, W, spatial)
        for p in parts[1:]:
            out[p] = next_label
            next_label += 1
    return out.reshape(labels.shape)


def _split_region(pix, max_size, min_size, X, W, spatial):
    if len(pix) <= max_size:
        return [pix]
    parts = _two_seed_split(pix, min_size, X, W, spatial)
    if parts is None:
        parts = _bfs_split(pix, min_size, W)
    if parts is None:
        return [pix]
    out = []
    for p in parts:
        out.extend(_split_region(p, max_size, min_size, X, W, spatial))
    return out


class _Region:
    """Local grid view of a pixel set for flood fills."""

    def __init__(self, pix, W):
        ys, xs = np.divmod(pix, W)
        self.y0, self.x0 = ys.min(), xs.min()
        self.h, self.w = ys.max() - self.y0 + 1, xs.max() - self.x0 + 1
        self.ly, self.lx = ys - self.y0, xs - self.x0
        self.pos = np.full((self.h, self.w), -1, dtype=np.int64)
        self.pos[self.ly, self.lx] = np.arange(len(pix))

    def neighbours(self, i):
        y, x = self.ly[i], self.lx[i]
        for yy, xx in ((y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
            if 0 <= yy < self.h and 0 <= xx < self.w:
                j = self.pos[yy, xx]
                if j >= 0:
                    yield j

    def components(self, members: np.ndarray) -> list[np.ndarray]:
        """Connected components of a subset (local indices), by first index."""
        inside = np.zeros(len(self.ly), dtype=bool)
        inside[members] = True
        seen = np.zeros(len(self.ly), dtype=bool)
        comps = []
        for s in np.sort(members):
            if seen[s]:
                continue
            seen[s] = True
            q, comp = deque([s]), [s]
            while q:
                i = q.popleft()
                for j in self.neighbours(i):
                    if inside[j] and not seen[j]:
                        seen[j] = True
                        q.append(j)
                        comp.append(j)
            comps.append(np.array(sorted(comp)))
        return comps


def _two_means(pix, X, W, spatial):
    """Two-means over spectrum + position, started from the extremes of the
    principal spatial axis. Returns a boolean side per pixel, or None."""
    ys, xs = np.divmod(pix, W)
    P = np.stack([xs, ys], 1).astype(float)
    F = X.reshape(-1, X.shape[-1])[pix]
    centred = P - P.mean(axis=0)
    axis = np.linalg.eigh(centred.T @ centred)[1][:, -1]
    proj = centred @ axis
    ends = [int(np.argmin(proj)), int(np.argmax(proj))]
    c_pos, c_spec = P[ends], F[ends]
    side = None
    for _ in range(10):
        d0 = np.linalg.norm(F - c_spec[0], axis=1) + spatial * np.linalg.norm(P - c_pos[0], axis=1)
        d1 = np.linalg.norm(F - c_spec[1], axis=1) + spatial * np.linalg.norm(P - c_pos[1], axis=1)
        new = d1 < d0
        if new.all() or not new.any():
            return None
        if side is not None and np.array_equal(new, side):
            break
        side = new
        c_pos = np.stack([P[~side].mean(0), P[side].mean(0)])
        c_spec = np.stack([F[~side].mean(0), F[side].mean(0)])
    return side


def _two_seed_split(pix, min_size, X, W, spatial):
    """Two-means split, then grow the two largest connected cores over the
    rest of the region."""
    side = _two_means(pix, X, W, spatial)
    if side is None:
        return None
    reg = _Region(pix, W)
    owner = np.full(len(pix), -1, dtype=np.int64)
    q = deque()
    for s, members in enumerate((np.flatnonzero(~side), np.flatnonzero(side))):
        comps = reg.components(members)
        core = max(comps, key=len)
        owner[core] = s
    for i in np.flatnonzero(owner >= 0):
        q.append(i)
    while q:
        i = q.popleft()
        for j in reg.neighbours(i):
            if owner[j] < 0:
                owner[j] = owner[i]
                q.append(j)
    a, b = pix[owner == 0], pix[owner == 1]
    if len(a) < min_size or len(b) < min_size:
        return None
    return [a, b]


def _bfs_split(pix, min_size, W):
    """Fallback: breadth-first prefix of half the region, with small
    leftover pieces folded back into the prefix."""
    reg = _Region(pix, W)
    start = int(np.argmin(reg.ly * reg.w + reg.lx))
    seen = np.zeros(len(pix), dtype=bool)
    seen[start] = True
    q, order = deque([start]), []
    while q:
        i = q.popleft()
        order.append(i)
        for j in reg.neighbours(i):
            if not seen[j]:
                seen[j] = True
                q.append(j)
    half = len(order) // 2
    prefix = set(order[:half])
    rest = np.array(sorted(order[half:]))
    parts = []
    for comp in reg.components(rest):
        if len(comp) < min_size:
            prefix.update(comp.tolist())
        else:
            parts.append(pix[comp])
    if not parts:
        return None
    return [pix[np.array(sorted(prefix))]] + parts

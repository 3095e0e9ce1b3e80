"""Classification-map and superpixel-boundary images.

Maps are always written as binary PPM (P6). PNG output is available when
Pillow is installed.
"""
from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np

__all__ = ["default_palette", "colorize", "render_map", "boundary_overlay", "write_ppm",
           "read_ppm", "write_png", "png_available"]

try:  # optional dependency
    from PIL import Image as _PILImage
except ImportError:  # pragma: no cover
    _PILImage = None


def png_available() -> bool:
    return _PILImage is not None


def default_palette(num_classes: int) -> np.ndarray:
    """Evenly spaced hues at full saturation, one RGB row per class.

    Row ``c - 1`` is the colour of class ``c``; the colours are distinct and
    none is black, which is reserved for class 0.
    """
    if num_classes < 0:
        raise ValueError("num_classes must be >= 0")
    golden = 0.618033988749895
    rows = []
    for i in range(num_classes):
        hue = (i * golden) % 1.0
        val = 1.0 if i % 2 == 0 else 0.75
        rows.append([round(255 * v) for v in colorsys.hsv_to_rgb(hue, 0.85, val)])
    return np.array(rows, dtype=np.uint8).reshape(num_classes, 3)


def colorize(pred: np.ndarray, palette: np.ndarray | None = None) -> np.ndarray:
    """RGB buffer (H, W, 3) for a class map; class 0 is black."""
    pred = np.asarray(pred)
    if pred.ndim != 2:
        raise ValueError("class map must be 2-D")
    if pred.size and pred.min() < 0:
        raise ValueError("class indices must be non-negative")
    top = int(pred.max()) if pred.size else 0
    if palette is None:
        palette = default_palette(top)
    palette = np.asarray(palette, dtype=np.uint8).reshape(-1, 3)
    if top > palette.shape[0]:
        raise ValueError(f"palette has {palette.shape[0]} colours but the map uses class {top}")
    lut = np.vstack([np.zeros((1, 3), dtype=np.uint8), palette])
    return lut[pred]


def write_ppm(path, rgb: np.ndarray) -> Path:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
    return path


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM with maxval 255 (as written by :func:`write_ppm`)."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P6" or tokens[3] != "255":
        raise ValueError("only binary PPM with maxval 255 is supported")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    return np.frombuffer(raw[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def write_png(path, rgb: np.ndarray) -> Path:
    if _PILImage is None:
        raise RuntimeError("PNG output needs Pillow")
    path = Path(path)
    _PILImage.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), "RGB").save(path, format="PNG")
    return path


def render_map(pred: np.ndarray, path, palette: np.ndarray | None = None, png: bool = True) -> list[Path]:
    """Write ``<path>.ppm`` and, if possible, ``<path>.png``; returns the files written.

    ``path`` may carry a ``.ppm`` or ``.png`` suffix, which is dropped.
    """
    rgb = colorize(pred, palette)
    base = Path(path)
    if base.suffix.lower() in (".ppm", ".png"):
        base = base.with_suffix("")
    out = [write_ppm(base.with_suffix(".ppm"), rgb)]
    if png and png_available():
        out.append(write_png(base.with_suffix(".png"), rgb))
    return out


def boundary_overlay(assignment: np.ndarray, background: np.ndarray | None = None,
                     color=(255, 255, 0)) -> np.ndarray:
    """RGB image with superpixel borders drawn over ``background``.

    A pixel is on a border when its right or lower neighbour belongs to a
    different superpixel. ``background`` may be a 2-D or (H, W, k) float
    array, which is scaled to grey levels; the default is black.
    """
    a = np.asarray(assignment)
    H, W = a.shape
    if background is None:
        rgb = np.zeros((H, W, 3), dtype=np.uint8)
    else:
        bg = np.asarray(background, dtype=np.float64)
        if bg.ndim == 3:
            bg = bg[:, :, 0]
        lo, hi = bg.min(), bg.max()
        g = np.zeros_like(bg) if hi <= lo else (bg - lo) / (hi - lo)
        rgb = np.repeat(np.round(255 * g).astype(np.uint8)[:, :, None], 3, axis=2)
    edge = np.zeros((H, W), dtype=bool)
    edge[:, :-1] |= a[:, :-1] != a[:, 1:]
    edge[:-1, :] |= a[:-1, :] != a[1:, :]
    rgb[edge] = np.asarray(color, dtype=np.uint8)
    return rgb

"""Image carriers, corruption strategies, and free-form mask synthesis.

Masks are unions of thick brush strokes (rasterized as capsules) and axis
aligned rectangles. All samplers are pure functions of their inputs and an
explicit seed; the exact PRNG draw order is part of the contract and is
documented on each sampler so independent implementations can match bit
for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DomainError, IoError, SaturationError
from .rng import generator_from, split_seed

__all__ = [
    "RasterImage",
    "MaskBitmap",
    "MaskSamplerConfig",
    "load_png",
    "save_png",
    "load_mask_png",
    "save_mask_png",
    "mask_square",
    "noisy_pixels",
    "sample_free_form_mask",
    "sample_mask_in_ratio",
    "apply_mask",
]


@dataclass(frozen=True)
class RasterImage:
    """8-bit raster image, shape (height, width, channels), channels 1 or 3."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DomainError(f"expected (h, w, 1|3) image array, got shape {self.data.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError("image dimensions must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @staticmethod
    def full(width: int, height: int, value: int = 0, channels: int = 1) -> "RasterImage":
        if width < 1 or height < 1:
            raise DomainError("image dimensions must be positive")
        return RasterImage(np.full((height, width, channels), value, dtype=np.uint8))


@dataclass(frozen=True)
class MaskBitmap:
    """Boolean hole mask; True marks missing (masked) pixels."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"expected (h, w) boolean mask, got shape {self.bits.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def masked_ratio(self) -> float:
        return float(np.count_nonzero(self.bits)) / (self.height * self.width)


@dataclass(frozen=True)
class MaskSamplerConfig:
    """Inclusive integer ranges driving the free-form mask sampler."""

    brush_width_range: tuple[int, int] = (12, 48)
    vertex_range: tuple[int, int] = (4, 18)
    stroke_count_range: tuple[int, int] = (0, 20)
    full_rect_count_range: tuple[int, int] = (0, 5)
    half_rect_count_range: tuple[int, int] = (0, 10)

    def __post_init__(self):
        for name in (
            "brush_width_range",
            "vertex_range",
            "stroke_count_range",
            "full_rect_count_range",
            "half_rect_count_range",
        ):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise DomainError(f"{name} must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")
        if self.brush_width_range[0] < 1:
            raise DomainError("brush width must be >= 1")
        if self.vertex_range[0] < 2:
            raise DomainError("a stroke needs at least 2 vertices")


# ---------------------------------------------------------------------------
# PNG I/O


def load_png(path) -> RasterImage:
    """Decode a PNG into a 1- or 3-channel RasterImage (other modes become RGB)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise IoError(f"cannot decode image {path}: {exc}") from exc
    return RasterImage(arr)


def save_png(img: RasterImage, path) -> None:
    path = Path(path)
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    try:
        Image.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write image {path}: {exc}") from exc


def save_mask_png(mask: MaskBitmap, path) -> None:
    """Serialize as 1-channel PNG, 255 = hole, 0 = keep."""
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    try:
        Image.fromarray(arr, mode="L").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write mask {path}: {exc}") from exc


def load_mask_png(path) -> MaskBitmap:
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except OSError as exc:
        raise IoError(f"cannot decode mask {path}: {exc}") from exc
    return MaskBitmap(arr >= 128)


# ---------------------------------------------------------------------------
# Corruption strategies


def mask_square(img: RasterImage, w: int, seed: int) -> RasterImage:
    """Zero out a random w-by-w square; the corner is uniform over placements.

    Draw order: corner x first, then corner y, both inclusive integer uniforms
    over [0, width-w] and [0, height-w].
    """
    if w < 1 or w > min(img.width, img.height):
        raise DomainError(f"square width {w} out of range for {img.width}x{img.height} image")
    rng = generator_from(seed)
    x = int(rng.integers(0, img.width - w + 1))
    y = int(rng.integers(0, img.height - w + 1))
    out = np.array(img.data)
    out[y : y + w, x : x + w, :] = 0
    return RasterImage(out)


def noisy_pixels(img: RasterImage, n: int, seed: int) -> RasterImage:
    """Replace n random pixels with their nearest untouched neighbor's value.

    Positions are drawn uniformly without replacement. Each chosen pixel takes
    the value of the nearest non-chosen pixel under Euclidean distance between
    pixel centers; among equidistant candidates the smallest row wins, then the
    smallest column. Channels move together.
    """
    total = img.width * img.height
    if n < 0 or n >= total:
        raise DomainError(f"pixel count {n} must lie in [0, {total})")
    if n == 0:
        return img
    rng = generator_from(seed)
    flat = rng.choice(total, size=n, replace=False)
    chosen = np.zeros((img.height, img.width), dtype=bool)
    chosen.flat[flat] = True

    # Exact Euclidean distance from each chosen pixel to the nearest keeper;
    # squared distances between pixel centers are integers, which makes the
    # tie-break enumeration below exact.
    dist = ndimage.distance_transform_edt(chosen)
    out = np.array(img.data)
    src = img.data
    h, w = img.height, img.width
    ys, xs = np.nonzero(chosen)
    for y, x in zip(ys.tolist(), xs.tolist()):
        r2 = int(round(dist[y, x] ** 2))
        r = math.isqrt(r2)
        found = False
        for dy in range(-r, r + 1):
            rem = r2 - dy * dy
            if rem < 0:
                continue
            dx = math.isqrt(rem)
            if dx * dx != rem:
                continue
            cy = y + dy
            if cy < 0 or cy >= h:
                continue
            for cx in ((x - dx, x + dx) if dx else (x,)):
                if 0 <= cx < w and not chosen[cy, cx]:
                    out[y, x, :] = src[cy, cx, :]
                    found = True
                    break
            if found:
                break
        assert found, "exact EDT guarantees a source pixel at the reported distance"
    return RasterImage(out)


# ---------------------------------------------------------------------------
# Free-form mask sampling


def _randint(rng: np.random.Generator, lo: int, hi: int) -> int:
    # inclusive integer uniform
    return int(rng.integers(lo, hi + 1))


def _stamp_capsule(bits: np.ndarray, p, q, radius: float) -> None:
    """Mask every pixel whose center lies within `radius` of segment p-q."""
    h, w = bits.shape
    px, py = p
    qx, qy = q
    c_lo = max(0, math.floor(min(px, qx) - radius - 0.5))
    c_hi = min(w - 1, math.ceil(max(px, qx) + radius - 0.5))
    r_lo = max(0, math.floor(min(py, qy) - radius - 0.5))
    r_hi = min(h - 1, math.ceil(max(py, qy) + radius - 0.5))
    if c_lo > c_hi or r_lo > r_hi:
        return
    xs = np.arange(c_lo, c_hi + 1, dtype=np.float64) + 0.5
    ys = np.arange(r_lo, r_hi + 1, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    dx = qx - px
    dy = qy - py
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        d2 = (gx - px) ** 2 + (gy - py) ** 2
    else:
        t = np.clip(((gx - px) * dx + (gy - py) * dy) / seg2, 0.0, 1.0)
        d2 = (gx - (px + t * dx)) ** 2 + (gy - (py + t * dy)) ** 2
    bits[r_lo : r_hi + 1, c_lo : c_hi + 1] |= d2 <= radius * radius


def sample_free_form_mask(w: int, h: int, cfg: MaskSamplerConfig, seed: int) -> MaskBitmap:
    """Sample a free-form mask of brush strokes plus rectangles.

    Canonical draw order (normative for bit-exact reproduction):

    1. stroke count S (inclusive integer uniform over stroke_count_range);
    2. per stroke: brush width b, vertex count V (both inclusive integer
       uniforms), start point x then y (continuous uniform over [0, w) and
       [0, h)), then for each of the V-1 segments: the direction (first
       segment U[0, 2pi), later segments the previous direction plus
       U[-pi/2, pi/2]) followed by the segment length, continuous uniform
       between b and min(w, h)/4 (bounds swapped if b exceeds that cap);
    3. full-rectangle count, then per rectangle width ~ U[1, w], height
       ~ U[1, h], corner x ~ U[0, w-rw], corner y ~ U[0, h-rh] (all
       inclusive integer uniforms);
    4. half-rectangle count, then per rectangle the same with side bounds
       max(1, w//2) and max(1, h//2).

    A stroke is rasterized as the union of capsules: a pixel is masked iff
    its center lies within b/2 of some segment, which also yields the disk
    caps of radius b/2 at every vertex. Vertices may leave the canvas; the
    off-canvas portion simply does not mark pixels.
    """
    if w < 1 or h < 1:
        raise DomainError("mask dimensions must be positive")
    rng = generator_from(seed)
    bits = np.zeros((h, w), dtype=bool)

    length_cap = min(w, h) / 4.0
    strokes = _randint(rng, *cfg.stroke_count_range)
    for _ in range(strokes):
        b = _randint(rng, *cfg.brush_width_range)
        vertices = _randint(rng, *cfg.vertex_range)
        x = float(rng.uniform(0.0, w))
        y = float(rng.uniform(0.0, h))
        theta = 0.0
        for k in range(vertices - 1):
            if k == 0:
                theta = float(rng.uniform(0.0, 2.0 * math.pi))
            else:
                theta += float(rng.uniform(-math.pi / 2.0, math.pi / 2.0))
            lo, hi = min(float(b), length_cap), max(float(b), length_cap)
            length = float(rng.uniform(lo, hi))
            nx = x + length * math.cos(theta)
            ny = y + length * math.sin(theta)
            _stamp_capsule(bits, (x, y), (nx, ny), b / 2.0)
            x, y = nx, ny

    for count_range, w_hi, h_hi in (
        (cfg.full_rect_count_range, w, h),
        (cfg.half_rect_count_range, max(1, w // 2), max(1, h // 2)),
    ):
        rects = _randint(rng, *count_range)
        for _ in range(rects):
            rw = _randint(rng, 1, w_hi)
            rh = _randint(rng, 1, h_hi)
            x0 = _randint(rng, 0, w - rw)
            y0 = _randint(rng, 0, h - rh)
            bits[y0 : y0 + rh, x0 : x0 + rw] = True

    return MaskBitmap(bits)


def sample_mask_in_ratio(
    w: int,
    h: int,
    cfg: MaskSamplerConfig,
    lo: float,
    hi: float,
    seed: int,
    max_attempts: int = 10000,
) -> MaskBitmap:
    """Rejection-sample masks until the masked ratio falls strictly in (lo, hi).

    Attempt k uses the derived seed split(seed, "attempt", k), so success does
    not depend on how earlier attempts consumed randomness.
    """
    if not (0.0 <= lo < hi <= 1.0):
        raise DomainError(f"invalid ratio interval ({lo}, {hi})")
    if max_attempts < 1:
        raise DomainError("max_attempts must be >= 1")
    closest = math.inf
    closest_ratio = math.nan
    for k in range(max_attempts):
        mask = sample_free_form_mask(w, h, cfg, split_seed(seed, "attempt", k))
        ratio = mask.masked_ratio
        if lo < ratio < hi:
            return mask
        gap = max(lo - ratio, ratio - hi)
        if gap < closest:
            closest = gap
            closest_ratio = ratio
    raise SaturationError(max_attempts, closest_ratio, lo, hi)


def apply_mask(img: RasterImage, m: MaskBitmap, fill: int = 0) -> RasterImage:
    """Set masked pixels to `fill` on every channel."""
    if (m.height, m.width) != (img.height, img.width):
        raise DomainError(
            f"mask {m.width}x{m.height} does not match image {img.width}x{img.height}"
        )
    if not 0 <= fill <= 255:
        raise DomainError("fill must be an 8-bit value")
    out = np.array(img.data)
    out[m.bits, :] = fill
    return RasterImage(out)

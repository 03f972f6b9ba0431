"""Grayscale/RGB image substrate: binary PNM codec, grayscale conversion,
bilinear resizing, integral images, and the denoise-then-enhance
preprocessing chain.

All operations are pure; Image values are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedHeader,
    OutOfBounds,
    TruncatedRaster,
    UnsupportedMaxval,
)

GRAY = 1
RGB = 3


def iround(x: float) -> int:
    """Round half up to an int (0.5 always rounds toward +inf)."""
    return int(math.floor(x + 0.5))


def _round_half_up(a: np.ndarray) -> np.ndarray:
    return np.floor(a + 0.5)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: left column x, top row y, width w, height h."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"rect must have positive extent, got {self}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def iou(self, other: "Rect") -> float:
        """Intersection area over union area; 0.0 when disjoint."""
        ix = min(self.x2, other.x2) - max(self.x, other.x)
        iy = min(self.y2, other.y2) - max(self.y, other.y)
        if ix <= 0 or iy <= 0:
            return 0.0
        inter = ix * iy
        return inter / (self.area + other.area - inter)


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable 8-bit image. pixels is (h, w) for gray, (h, w, 3) for RGB."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.channels not in (GRAY, RGB):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        expect = (self.height, self.width) if self.channels == GRAY else (
            self.height, self.width, 3)
        if self.pixels.shape != expect or self.pixels.dtype != np.uint8:
            raise ValueError(
                f"pixel array mismatch: shape {self.pixels.shape} "
                f"dtype {self.pixels.dtype}, expected {expect} uint8")
        self.pixels.setflags(write=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.channels == other.channels
                and np.array_equal(self.pixels, other.pixels))

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    @staticmethod
    def from_array(arr: np.ndarray) -> "Image":
        """Wrap an integer-valued array already in [0, 255]."""
        a = np.asarray(arr)
        if a.ndim == 2:
            channels = GRAY
        elif a.ndim == 3 and a.shape[2] == 3:
            channels = RGB
        else:
            raise ValueError(f"unsupported array shape {a.shape}")
        if a.dtype != np.uint8:
            if a.size and (a.min() < 0 or a.max() > 255):
                raise ValueError("pixel values outside [0, 255]")
            a = a.astype(np.uint8)
        else:
            a = a.copy()
        return Image(a.shape[1], a.shape[0], channels, a)

    @staticmethod
    def from_float(arr: np.ndarray) -> "Image":
        """Round half up and clamp a float array into an 8-bit image."""
        a = np.clip(_round_half_up(np.asarray(arr, dtype=np.float64)), 0, 255)
        return Image.from_array(a.astype(np.uint8))


# ---------------------------------------------------------------------------
# PNM codec (binary P5/P6, maxval 255)

def _parse_pnm_header(data: bytes) -> tuple[bytes, list[int], int]:
    """Return (magic, [w, h, maxval], raster_offset).

    Tokens are whitespace separated; '#' starts a comment running to end of
    line; the raster begins after exactly one whitespace byte following the
    maxval token.
    """
    n = len(data)
    if n < 2 or data[0:1] != b"P" or data[1:2] not in (b"5", b"6"):
        raise MalformedHeader("not a binary PGM/PPM (expected P5 or P6 magic)")
    magic = data[0:2]
    pos = 2
    values: list[int] = []
    while len(values) < 3:
        # skip whitespace and comments
        while pos < n:
            c = data[pos:pos + 1]
            if c in b" \t\r\n\x0b\x0c":
                pos += 1
            elif c == b"#":
                while pos < n and data[pos:pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < n and data[pos:pos + 1] not in b" \t\r\n\x0b\x0c#":
            pos += 1
        tok = data[start:pos]
        if not tok:
            raise MalformedHeader("truncated header")
        try:
            values.append(int(tok))
        except ValueError:
            raise MalformedHeader(f"non-numeric header token {tok!r}") from None
    if pos >= n or data[pos:pos + 1] not in b" \t\r\n\x0b\x0c":
        raise MalformedHeader("missing whitespace before raster")
    return magic, values, pos + 1


def load_pnm(data: bytes) -> Image:
    """Decode binary PGM (P5, gray) or PPM (P6, RGB) bytes."""
    magic, (w, h, maxval), offset = _parse_pnm_header(data)
    if w <= 0 or h <= 0:
        raise MalformedHeader(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval must be 255, got {maxval}")
    channels = GRAY if magic == b"P5" else RGB
    need = w * h * channels
    raster = data[offset:offset + need]
    if len(raster) < need:
        raise TruncatedRaster(
            f"raster has {len(raster)} bytes, expected {need}")
    arr = np.frombuffer(raster, dtype=np.uint8, count=need)
    shape = (h, w) if channels == GRAY else (h, w, 3)
    return Image(w, h, channels, arr.reshape(shape).copy())


def save_pnm(img: Image) -> bytes:
    """Encode to binary PGM/PPM; load_pnm(save_pnm(img)) == img exactly."""
    magic = b"P5" if img.channels == GRAY else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + img.pixels.tobytes()


# ---------------------------------------------------------------------------
# Basic transforms

# Rec.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def to_grayscale(img: Image) -> Image:
    """Collapse RGB to gray with Rec.601 weights; gray input passes through."""
    if img.channels == GRAY:
        return img
    g = img.as_float() @ _LUMA
    return Image.from_float(g)


def resize_bilinear(img: Image, new_w: int, new_h: int) -> Image:
    """Resize a grayscale image with pixel-center-aligned bilinear sampling."""
    if img.channels != GRAY:
        raise ValueError("resize_bilinear expects a grayscale image")
    if new_w <= 0 or new_h <= 0:
        raise ValueError("target dimensions must be positive")
    if new_w == img.width and new_h == img.height:
        return img
    src = img.as_float()

    def axis_coords(dst_size: int, src_size: int):
        c = (np.arange(dst_size) + 0.5) * (src_size / dst_size) - 0.5
        c = np.clip(c, 0.0, src_size - 1.0)
        lo = np.floor(c).astype(np.int64)
        hi = np.minimum(lo + 1, src_size - 1)
        return lo, hi, c - lo

    x0, x1, fx = axis_coords(new_w, img.width)
    y0, y1, fy = axis_coords(new_h, img.height)
    fy = fy[:, None]
    top = src[y0[:, None], x0] * (1 - fx) + src[y0[:, None], x1] * fx
    bot = src[y1[:, None], x0] * (1 - fx) + src[y1[:, None], x1] * fx
    return Image.from_float(top * (1 - fy) + bot * fy)


def crop(img: Image, rect: Rect) -> Image:
    """Copy the pixels of rect out of a grayscale image."""
    if img.channels != GRAY:
        raise ValueError("crop expects a grayscale image")
    if rect.x < 0 or rect.y < 0 or rect.x2 > img.width or rect.y2 > img.height:
        raise OutOfBounds(f"{rect} outside {img.width}x{img.height} image")
    return Image.from_array(img.pixels[rect.y:rect.y2, rect.x:rect.x2])


# ---------------------------------------------------------------------------
# Integral images

@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area tables of a grayscale image.

    sums and squares are (h+1, w+1) int64 grids; entry (i, j) holds the sum
    of pixels (or squared pixels) in rows < i and columns < j.
    """

    width: int
    height: int
    sums: np.ndarray = field(repr=False)
    squares: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.sums.setflags(write=False)
        self.squares.setflags(write=False)


def integral_image(img: Image) -> IntegralImage:
    if img.channels != GRAY:
        raise ValueError("integral_image expects a grayscale image")
    p = img.pixels.astype(np.int64)
    sums = np.zeros((img.height + 1, img.width + 1), dtype=np.int64)
    squares = np.zeros_like(sums)
    np.cumsum(np.cumsum(p, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(p * p, axis=0), axis=1, out=squares[1:, 1:])
    return IntegralImage(img.width, img.height, sums, squares)


def _check_rect(ii: IntegralImage, rect: Rect) -> None:
    if rect.x < 0 or rect.y < 0 or rect.x2 > ii.width or rect.y2 > ii.height:
        raise OutOfBounds(f"{rect} outside {ii.width}x{ii.height} image")


def rect_sum(ii: IntegralImage, rect: Rect) -> int:
    """Exact pixel sum over rect in O(1)."""
    _check_rect(ii, rect)
    s = ii.sums
    return int(s[rect.y2, rect.x2] - s[rect.y, rect.x2]
               - s[rect.y2, rect.x] + s[rect.y, rect.x])


def rect_sum_squares(ii: IntegralImage, rect: Rect) -> int:
    """Exact sum of squared pixels over rect in O(1)."""
    _check_rect(ii, rect)
    s = ii.squares
    return int(s[rect.y2, rect.x2] - s[rect.y, rect.x2]
               - s[rect.y2, rect.x] + s[rect.y, rect.x])


# ---------------------------------------------------------------------------
# Preprocessing chain

def denoise(img: Image, spatial_sigma: float = 1.5,
            range_sigma: float = 30.0) -> Image:
    """Edge-preserving bilateral smoothing over a 5x5 neighborhood.

    Each output pixel is the weighted mean of its neighborhood, with weight
    exp(-d^2 / (2 ss^2)) * exp(-(I(p)-I(q))^2 / (2 rs^2)); borders are
    clamp-replicated. Output is rounded half up.
    """
    if img.channels != GRAY:
        raise ValueError("denoise expects a grayscale image")
    if spatial_sigma <= 0 or range_sigma <= 0:
        raise ValueError("sigmas must be positive")
    center = img.as_float()
    padded = np.pad(center, 2, mode="edge")
    num = np.zeros_like(center)
    den = np.zeros_like(center)
    inv2ss = 1.0 / (2.0 * spatial_sigma * spatial_sigma)
    inv2rs = 1.0 / (2.0 * range_sigma * range_sigma)
    h, w = center.shape
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            sw = math.exp(-(dy * dy + dx * dx) * inv2ss)
            q = padded[2 + dy:2 + dy + h, 2 + dx:2 + dx + w]
            diff = center - q
            wgt = sw * np.exp(-(diff * diff) * inv2rs)
            num += wgt * q
            den += wgt
    return Image.from_float(num / den)


def _tile_bounds(size: int, tiles: int) -> list[tuple[int, int]]:
    return [(t * size // tiles, (t + 1) * size // tiles) for t in range(tiles)]


def _tile_mapping(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clipped-equalization intensity mapping (256 floats) for one tile.

    A tile whose raw histogram occupies a single bin maps that bin to itself
    (identity), which makes constant regions fixed points.
    """
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) == 1:
        return np.arange(256, dtype=np.float64)
    n = tile.size
    if math.isfinite(clip_limit):
        clip = clip_limit * n / 256.0
        excess = np.maximum(hist - clip, 0.0).sum()
        hist = np.minimum(hist, clip) + excess / 256.0
    cdf = np.cumsum(hist)
    first = int(np.argmax(hist > 0))
    cdf_min = cdf[first]
    mapped = 255.0 * (cdf - cdf_min) / (n - cdf_min)
    return np.clip(mapped, 0.0, 255.0)


def enhance_contrast(img: Image, tiles: int = 8,
                     clip_limit: float = 2.0) -> Image:
    """Tile-based clipped histogram equalization (adaptive contrast).

    The image is split into tiles x tiles regions; each region's 256-bin
    histogram is clipped at clip_limit * (tile_pixels / 256) with the excess
    redistributed uniformly, turned into a CDF mapping, and the per-pixel
    result bilinearly interpolated between the four surrounding tile centers.
    """
    if img.channels != GRAY:
        raise ValueError("enhance_contrast expects a grayscale image")
    if tiles < 1:
        raise ValueError("tiles must be >= 1")
    if clip_limit < 1.0:
        raise ValueError("clip_limit must be >= 1.0")
    ty = min(tiles, img.height)
    tx = min(tiles, img.width)
    rows = _tile_bounds(img.height, ty)
    cols = _tile_bounds(img.width, tx)
    lut = np.empty((ty, tx, 256), dtype=np.float64)
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            lut[i, j] = _tile_mapping(img.pixels[r0:r1, c0:c1], clip_limit)

    def axis_interp(coords: np.ndarray, bounds):
        centers = np.array([(a + b - 1) / 2.0 for a, b in bounds])
        i0 = np.clip(np.searchsorted(centers, coords, side="right") - 1,
                     0, len(bounds) - 1)
        i1 = np.clip(i0 + 1, 0, len(bounds) - 1)
        span = centers[i1] - centers[i0]
        frac = np.where(span > 0, (coords - centers[i0]) / np.where(
            span > 0, span, 1.0), 0.0)
        return i0, i1, np.clip(frac, 0.0, 1.0)

    j0, j1, fx = axis_interp(np.arange(img.width, dtype=np.float64), cols)
    i0, i1, fy = axis_interp(np.arange(img.height, dtype=np.float64), rows)
    v = img.pixels
    i0c, i1c = i0[:, None], i1[:, None]
    fyc = fy[:, None]
    top = lut[i0c, j0, v] * (1 - fx) + lut[i0c, j1, v] * fx
    bot = lut[i1c, j0, v] * (1 - fx) + lut[i1c, j1, v] * fx
    return Image.from_float(top * (1 - fyc) + bot * fyc)


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the grayscale -> denoise -> enhance chain.

    low_light: "auto" engages enhancement when the grayscale mean falls
    below low_light_threshold; "on"/"off" force it.
    """

    low_light: str = "auto"
    low_light_threshold: float = 60.0
    denoise_spatial_sigma: float = 1.5
    denoise_range_sigma: float = 30.0
    clahe_tiles: int = 8
    clahe_clip_limit: float = 2.0

    def __post_init__(self):
        if self.low_light not in ("auto", "on", "off"):
            raise ValueError(f"bad low_light mode {self.low_light!r}")


DEFAULT_PREPROCESS = PreprocessConfig()


def preprocess(img: Image, config: PreprocessConfig = DEFAULT_PREPROCESS) -> Image:
    """Grayscale, then denoise, then (conditionally) enhance contrast.

    Denoising always precedes enhancement so noise is removed before any
    amplification. Enhancement runs when low_light is "on", or in "auto"
    mode when the grayscale mean intensity is below the threshold.
    """
    gray = to_grayscale(img)
    out = denoise(gray, config.denoise_spatial_sigma,
                  config.denoise_range_sigma)
    enhance = config.low_light == "on" or (
        config.low_light == "auto"
        and float(gray.pixels.mean()) < config.low_light_threshold)
    if enhance:
        out = enhance_contrast(out, config.clahe_tiles,
                               config.clahe_clip_limit)
    return out

"""Pixel container, lossless I/O, region tiling and per-region statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

READ_EXTENSIONS = {".png", ".bmp", ".jpg", ".jpeg"}
LOSSY_EXTENSIONS = {".jpg", ".jpeg"}


class ImageFormatError(ValueError):
    """Raised when an image cannot be decoded or written under the I/O policy."""


class DegenerateRegionError(ValueError):
    """Raised when a region has too few pixels or zero variance for statistics."""


@dataclass(frozen=True)
class ImageTensor:
    """C x H x W uint8 pixel array. The wrapped array is made read-only."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"expected a C x H x W array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) or np.issubdtype(arr.dtype, np.floating):
                if arr.size and (arr.min() < 0 or arr.max() > 255):
                    raise ValueError("samples must lie in [0, 255]")
                if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
                    raise ValueError("samples must be integers")
            else:
                raise ValueError(f"unsupported dtype {arr.dtype}")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def channel(self, c: int) -> np.ndarray:
        return self.data[c]

    def to_hwc(self) -> np.ndarray:
        """Return an H x W (x C) array suitable for PIL."""
        if self.channels == 1:
            return np.ascontiguousarray(self.data[0])
        return np.ascontiguousarray(np.moveaxis(self.data, 0, -1))

    def __eq__(self, other):
        if not isinstance(other, ImageTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True, order=True)
class Region:
    """Axis-aligned rectangle: column offset x0, row offset y0, width w, height h."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"region must be at least 1x1, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("region offsets must be non-negative")

    @property
    def size(self) -> int:
        """Side length used by the window-size logic: the larger dimension."""
        return max(self.w, self.h)

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w)

    def fits(self, width: int, height: int) -> bool:
        return self.x0 + self.w <= width and self.y0 + self.h <= height


@dataclass(frozen=True)
class RegionStats:
    mean: float
    variance: float


def load_image(path, drop_alpha: bool = True) -> ImageTensor:
    """Decode a PNG, BMP or JPEG file into an ImageTensor.

    Grayscale maps to one channel and RGB to three. An alpha channel is dropped
    with a warning when `drop_alpha` is set, otherwise it is an error.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("1", "P"):
                im = im.convert("RGBA" if "transparency" in im.info else ("L" if mode == "1" else "RGB"))
                mode = im.mode
            if mode == "LA":
                if not drop_alpha:
                    raise ImageFormatError(f"{path}: alpha channel not accepted")
                log.warning("%s: dropping alpha channel", path)
                im = im.convert("L")
                mode = "L"
            elif mode == "RGBA":
                if not drop_alpha:
                    raise ImageFormatError(f"{path}: alpha channel not accepted")
                log.warning("%s: dropping alpha channel", path)
                im = im.convert("RGB")
                mode = "RGB"
            if mode not in ("L", "RGB"):
                raise ImageFormatError(f"{path}: unsupported mode {mode!r} (need 8-bit L or RGB)")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.moveaxis(arr, -1, 0)
    return ImageTensor(arr)


def save_image(t: ImageTensor, path) -> None:
    """Write `t` losslessly as PNG. Lossy extensions are refused."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext in LOSSY_EXTENSIONS:
        raise ImageFormatError(f"{path}: lossy format refused, permutations must survive exactly")
    if ext != ".png":
        raise ImageFormatError(f"{path}: only .png output is supported")
    if t.channels not in (1, 3):
        raise ImageFormatError(f"cannot encode {t.channels} channels as PNG")
    mode = "L" if t.channels == 1 else "RGB"
    try:
        Image.fromarray(t.to_hwc(), mode=mode).save(path, format="PNG")
    except OSError as exc:
        raise ImageFormatError(f"cannot write {path}: {exc}") from exc


def tile(x0: int, y0: int, w: int, h: int, ws: int) -> list[Region]:
    """Tile a rectangle by ws x ws squares in row-major order, keeping residuals at true size."""
    if ws < 1:
        raise ValueError("window size must be >= 1")
    out = []
    for y in range(y0, y0 + h, ws):
        for x in range(x0, x0 + w, ws):
            out.append(Region(x, y, min(ws, x0 + w - x), min(ws, y0 + h - y)))
    return out


def split_regions(t: ImageTensor, ws: int) -> list[Region]:
    return tile(0, 0, t.width, t.height, ws)


def subdivide(r: Region, ws: int) -> list[Region]:
    return tile(r.x0, r.y0, r.w, r.h, ws)


def region_pixels(t: ImageTensor, r: Region, c: int) -> np.ndarray:
    if not r.fits(t.width, t.height):
        raise ValueError(f"{r} does not fit a {t.width}x{t.height} image")
    if not 0 <= c < t.channels:
        raise IndexError(f"channel {c} out of range for {t.channels} channels")
    return t.data[c][r.slices]


def _stats(px: np.ndarray) -> RegionStats:
    n = px.size
    if n < 2:
        raise DegenerateRegionError("variance is undefined for a single pixel")
    x = px.astype(np.float64)
    mu = x.mean()
    var = float(((x - mu) ** 2).sum() / (n - 1))
    return RegionStats(float(mu), var)


def region_stats(t: ImageTensor, r: Region, c: int) -> RegionStats:
    """Mean and variance of one channel of a region.

    The variance uses the n - 1 denominator (WS^2 - 1 for a square window).
    """
    return _stats(region_pixels(t, r, c))


def standardize_samples(px) -> np.ndarray:
    """Standardize an array of samples to mean 0 and (n - 1)-variance 1."""
    px = np.asarray(px, dtype=np.float64)
    st = _stats(px)
    if st.variance == 0:
        raise DegenerateRegionError("constant region cannot be standardized")
    return (px - st.mean) / math.sqrt(st.variance)


def standardize(t: ImageTensor, r: Region, c: int) -> np.ndarray:
    """Return the region's samples as (I - mu) / sigma, shape h x w."""
    return standardize_samples(region_pixels(t, r, c))

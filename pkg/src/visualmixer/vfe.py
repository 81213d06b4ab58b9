"""Visual Feature Entropy: squared neighbour differences summed inside regions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imagecore import ImageTensor, Region, region_pixels, region_stats, split_regions, DegenerateRegionError


@dataclass(frozen=True)
class VfeConfig:
    scale_factor: float = 1.0

    def __post_init__(self):
        if not self.scale_factor > 0:
            raise ValueError("scale_factor must be positive")


def gradient_energy(px) -> float:
    """Sum of squared forward differences along both axes of a 2-D block.

    Only pairs whose neighbour lies inside the block are counted, giving
    h*(w-1) horizontal and w*(h-1) vertical terms.
    """
    a = np.asarray(px)
    if np.issubdtype(a.dtype, np.integer):
        a = a.astype(np.int64)
        return float((np.diff(a, axis=1) ** 2).sum() + (np.diff(a, axis=0) ** 2).sum())
    a = a.astype(np.float64)
    return float((np.diff(a, axis=1) ** 2).sum() + (np.diff(a, axis=0) ** 2).sum())


def region_vfe(t: ImageTensor, r: Region, c: int) -> float:
    return gradient_energy(region_pixels(t, r, c))


def _tile_labels(height: int, width: int, ws: int) -> tuple[np.ndarray, int]:
    ncols = -(-width // ws)
    nrows = -(-height // ws)
    ys = np.arange(height) // ws
    xs = np.arange(width) // ws
    return ys[:, None] * ncols + xs[None, :], nrows * ncols


def tiled_vfe(plane: np.ndarray, ws: int) -> np.ndarray:
    """Per-tile gradient energy of one channel, tiles in row-major order.

    Matches `region_vfe` over `split_regions(t, ws)` exactly for integer input.
    """
    if ws < 1:
        raise ValueError("window size must be >= 1")
    a = np.asarray(plane).astype(np.int64)
    h, w = a.shape
    labels, n = _tile_labels(h, w, ws)
    out = np.zeros(n, dtype=np.int64)
    if w > 1:
        dx = np.diff(a, axis=1) ** 2
        same = (np.arange(w - 1) // ws) == (np.arange(1, w) // ws)
        np.add.at(out, labels[:, :-1][:, same].ravel(), dx[:, same].ravel())
    if h > 1:
        dy = np.diff(a, axis=0) ** 2
        same = (np.arange(h - 1) // ws) == (np.arange(1, h) // ws)
        np.add.at(out, labels[:-1, :][same, :].ravel(), dy[same, :].ravel())
    return out.astype(np.float64)


def image_vfe(t: ImageTensor, c: int, ws: int, cfg: VfeConfig = VfeConfig()) -> float:
    total = math.fsum(tiled_vfe(t.channel(c), ws))
    return cfg.scale_factor * total / (t.width * t.height)


def multichannel_vfe(t: ImageTensor, ws: int, cfg: VfeConfig = VfeConfig()) -> float:
    return math.fsum(image_vfe(t, c, ws, cfg) for c in range(t.channels)) / t.channels


def global_vfe(t: ImageTensor, cfg: VfeConfig = VfeConfig()) -> float:
    """Multi-channel VFE with the whole image as one region."""
    return multichannel_vfe(t, max(t.width, t.height), cfg)


def normalized_samples_statistic(px) -> float:
    """Gradient energy divided by twice the sample variance of the block."""
    a = np.asarray(px, dtype=np.float64)
    if a.size < 2:
        raise DegenerateRegionError("need at least two samples")
    var = a.var(ddof=1)
    if var == 0:
        raise DegenerateRegionError("constant region has no normalized statistic")
    return gradient_energy(a) / (2.0 * var)


def normalized_region_statistic(t: ImageTensor, r: Region, c: int) -> float:
    st = region_stats(t, r, c)
    if st.variance == 0:
        raise DegenerateRegionError("constant region has no normalized statistic")
    return region_vfe(t, r, c) / (2.0 * st.variance)


def lower_median(values) -> float:
    """Lower median, always one of the inputs."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("median of empty sequence")
    return float(v[(v.size - 1) // 2])


def mean_region_vfe(t: ImageTensor, r: Region) -> float:
    """Region VFE averaged over channels."""
    return math.fsum(region_vfe(t, r, c) for c in range(t.channels)) / t.channels


@dataclass
class VfeReport:
    ws: int
    width: int
    height: int
    channels: int
    scale_factor: float
    # (region, channel, value) in region order then channel order
    per_region: list[tuple[Region, int, float]] = field(default_factory=list)
    channel_vfe: tuple[float, ...] = ()
    multichannel_vfe: float = 0.0
    median_region_vfe: float = 0.0

    @property
    def image_vfe(self) -> float:
        """VFE of the first channel; the whole-image value for grayscale input."""
        return self.channel_vfe[0]

    def to_lines(self) -> list[str]:
        lines = [f"# ws={self.ws} width={self.width} height={self.height} channels={self.channels} "
                 f"F={self.scale_factor!r}"]
        lines.append("x0,y0,w,h,channel,vfe")
        for r, c, v in self.per_region:
            lines.append(f"{r.x0},{r.y0},{r.w},{r.h},{c},{v!r}")
        per = ",".join(repr(v) for v in self.channel_vfe)
        lines.append(f"# summary channel_vfe={per} multichannel_vfe={self.multichannel_vfe!r} "
                     f"median_region_vfe={self.median_region_vfe!r}")
        return lines


def vfe_report(t: ImageTensor, ws: int, cfg: VfeConfig = VfeConfig()) -> VfeReport:
    regions = split_regions(t, ws)
    per_channel = [tiled_vfe(t.channel(c), ws) for c in range(t.channels)]
    per_region = [(r, c, float(per_channel[c][i])) for i, r in enumerate(regions) for c in range(t.channels)]
    area = t.width * t.height
    channel_vfe = tuple(cfg.scale_factor * math.fsum(v) / area for v in per_channel)
    averaged = np.mean(np.stack(per_channel), axis=0)
    return VfeReport(
        ws=ws,
        width=t.width,
        height=t.height,
        channels=t.channels,
        scale_factor=cfg.scale_factor,
        per_region=per_region,
        channel_vfe=channel_vfe,
        multichannel_vfe=math.fsum(channel_vfe) / t.channels,
        median_region_vfe=lower_median(averaged),
    )

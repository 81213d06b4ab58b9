"""Key-less adversary: search-space accounting and a greedy min-VFE window solver."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .imagecore import ImageTensor, load_image, tile

SECURITY_BITS = 128
MAX_ATTACK_WS = 3


class AttackError(ValueError):
    pass


def log2_factorial(n: int) -> float:
    """log2(n!) from the exact integer factorial."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.log2(math.factorial(n))


def log2_sum_factorials(sizes) -> float:
    """log2 of sum(n!) over `sizes`, exact big-integer summation."""
    total = sum(math.factorial(n) for n in sizes)
    return math.log2(total) if total else float("-inf")


@dataclass(frozen=True)
class SearchSpaceEstimate:
    log2_sum: float
    log2_product: float
    channels: int
    log2_sum_channels: float
    log2_product_channels: float
    windows: int

    @property
    def exceeds_threshold(self) -> bool:
        return self.log2_sum > SECURITY_BITS

    @property
    def per_channel_multiplier(self) -> bool:
        return self.channels > 1


def search_space_from_sizes(pixel_counts, channels: int = 1) -> SearchSpaceEstimate:
    """Count orderings for windows holding the given numbers of pixels.

    The sum form adds n! over windows; the product form multiplies them.
    With independent per-channel shuffles every window appears once per channel.
    """
    counts = list(pixel_counts)
    log_sum = log2_sum_factorials(counts)
    log_prod = math.fsum(log2_factorial(n) for n in counts)
    return SearchSpaceEstimate(
        log2_sum=log_sum,
        log2_product=log_prod,
        channels=channels,
        log2_sum_channels=log_sum + math.log2(channels) if counts else log_sum,
        log2_product_channels=channels * log_prod,
        windows=len(counts),
    )


def search_space(plan) -> SearchSpaceEstimate:
    """Search-space size of a ShufflePlan, one term per shuffled window."""
    counts = []
    for e in plan.entries:
        for win in tile(e.region.x0, e.region.y0, e.region.w, e.region.h, e.ws):
            counts.append(win.area)
    return search_space_from_sizes(counts, plan.channels)


# ---------------------------------------------------------------- greedy solver

@dataclass
class AttackReport:
    ws: int
    channel: int
    windows_attempted: int
    exact_recovery_fraction: float | None
    runtime: float

    def to_record(self) -> str:
        frac = "" if self.exact_recovery_fraction is None else repr(self.exact_recovery_fraction)
        return (f"ws={self.ws} channel={self.channel} windows={self.windows_attempted} "
                f"recovery={frac} runtime={self.runtime:.3f}")


@lru_cache(maxsize=None)
def _perms(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int8)


@lru_cache(maxsize=None)
def _window_pairs(h: int, w: int):
    """Index pairs (a, b) of horizontally and vertically adjacent cells, row-major."""
    pairs = []
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                pairs.append((y * w + x, y * w + x + 1))
            if y + 1 < h:
                pairs.append((y * w + x, (y + 1) * w + x))
    a, b = zip(*pairs) if pairs else ((), ())
    return np.array(a, dtype=np.intp), np.array(b, dtype=np.intp)


@lru_cache(maxsize=None)
def _score_indices(h: int, w: int):
    """Gather indices turning per-value cost tables into per-candidate scores."""
    n = h * w
    perms = _perms(n).astype(np.int32)
    a, b = _window_pairs(h, w)
    pair_idx = perms[:, a] * n + perms[:, b]
    left_idx = perms[:, np.arange(h) * w] * h + np.arange(h)
    top_idx = perms[:, np.arange(w)] * w + np.arange(w)
    return pair_idx, left_idx, top_idx


def _best_arrangement(values: np.ndarray, h: int, w: int, left, top) -> np.ndarray:
    """Arrangement of `values` into h x w minimizing in-window plus seam energy."""
    pair_idx, left_idx, top_idx = _score_indices(h, w)
    v = values.astype(np.float64)
    score = ((v[:, None] - v[None, :]) ** 2).ravel()[pair_idx].sum(axis=1)
    if left is not None:
        score += ((v[:, None] - left[None, :]) ** 2).ravel()[left_idx].sum(axis=1)
    if top is not None:
        score += ((v[:, None] - top[None, :]) ** 2).ravel()[top_idx].sum(axis=1)
    best = _perms(h * w)[int(np.argmin(score))]
    return v[best].reshape(h, w)


def min_vfe_attack(t_shuffled: ImageTensor, ws: int, c: int = 0, truth: ImageTensor | None = None):
    """Reassemble one channel window by window, left to right and top to bottom.

    Each ws x ws window takes the arrangement of its own pixels that minimizes
    gradient energy inside the window plus seams against the already placed
    left and top neighbours. Only the shuffled tensor is consulted; `truth` is
    used solely to score the result.
    """
    if ws not in (2, MAX_ATTACK_WS):
        raise AttackError(f"attack window must be 2 or 3, got {ws}")
    if not 0 <= c < t_shuffled.channels:
        raise AttackError(f"channel {c} out of range")
    start = time.perf_counter()
    src = t_shuffled.channel(c).astype(np.float64)
    out = np.zeros_like(src)
    windows = tile(0, 0, t_shuffled.width, t_shuffled.height, ws)
    for r in windows:
        ys, xs = r.slices
        vals = src[ys, xs].ravel()
        left = out[ys, r.x0 - 1] if r.x0 > 0 else None
        top = out[r.y0 - 1, xs] if r.y0 > 0 else None
        out[ys, xs] = _best_arrangement(vals, r.h, r.w, left, top)
    frac = None
    if truth is not None:
        if truth.shape != t_shuffled.shape:
            raise AttackError("ground truth shape differs from the shuffled image")
        frac = float(np.mean(out == truth.channel(c)))
    data = np.array(t_shuffled.data)
    data[c] = out.astype(np.uint8)
    report = AttackReport(ws, c, len(windows), frac, time.perf_counter() - start)
    return ImageTensor(data), report


def random_placement_fraction(t_shuffled: ImageTensor, truth: ImageTensor, ws: int, c: int = 0,
                              seed: int = 0) -> float:
    """Baseline: place each window's pixels by a seeded random permutation."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    src = t_shuffled.channel(c)
    out = np.empty_like(src)
    for r in tile(0, 0, t_shuffled.width, t_shuffled.height, ws):
        ys, xs = r.slices
        vals = src[ys, xs].ravel()
        out[ys, xs] = vals[gen.permutation(vals.size)].reshape(r.h, r.w)
    return float(np.mean(out == truth.channel(c)))


# ---------------------------------------------------------------- sweep

@dataclass
class SweepRow:
    ws: int
    images: int
    mean_recovery: float
    mean_baseline: float


def attack_sweep(corpus_dir, ws_list=(2, 3), seed: int = 0, channel: int = 0, log=None) -> list[SweepRow]:
    """Shuffle each corpus image on a uniform ws grid, attack it, average recovery."""
    from .mixer import MixKey, image_id_for, uniform_shuffle

    corpus_dir = Path(corpus_dir)
    paths = sorted(p for p in corpus_dir.glob("*.png")) if corpus_dir.is_dir() else []
    images = []
    for p in paths:
        try:
            images.append((p.name, load_image(p)))
        except Exception as exc:  # per-file skip
            if log is not None:
                log.error("%s: %s", p, exc)
    rows = []
    if not images:
        return rows
    for ws in ws_list:
        rec, base = [], []
        for name, t in images:
            key = MixKey(seed, image_id_for(name))
            shuffled, _ = uniform_shuffle(t, ws, key)
            _, report = min_vfe_attack(shuffled, ws, channel, truth=t)
            rec.append(report.exact_recovery_fraction)
            base.append(random_placement_fraction(shuffled, t, ws, channel, seed))
        rows.append(SweepRow(ws, len(images), float(np.mean(rec)), float(np.mean(base))))
    return rows


def format_sweep(rows: list[SweepRow]) -> list[str]:
    lines = ["ws,images,mean_recovery,mean_random_baseline"]
    for r in rows:
        lines.append(f"{r.ws},{r.images},{r.mean_recovery!r},{r.mean_baseline!r}")
    return lines

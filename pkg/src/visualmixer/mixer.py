"""VFE-guided adaptive window shuffling with keyed, reproducible plans."""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .imagecore import (
    READ_EXTENSIONS, ImageTensor, Region, load_image, save_image, split_regions, subdivide, tile,
)
from .vfe import global_vfe, lower_median, mean_region_vfe, tiled_vfe

log = logging.getLogger(__name__)

PLAN_FORMAT = "visualmixer-plan"
PLAN_VERSION = 1
KEYFILE_FORMAT = "visualmixer-keyfile"
KEYFILE_VERSION = 1
KEYFILE_NAME = "visualmixer.key"
CHANNEL_MODES = ("spatial", "rotate")


class MixerError(ValueError):
    pass


class PlanMismatchError(MixerError):
    pass


def image_id_for(relpath: str) -> str:
    """Stable id for an image: hash of its dataset-relative POSIX path."""
    return hashlib.sha256(relpath.replace(os.sep, "/").encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class MixKey:
    master_seed: int
    image_id: str = ""

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**256:
            raise MixerError("master seed must be a 256-bit non-negative integer")

    @property
    def seed_hex(self) -> str:
        return f"{self.master_seed:064x}"

    @cached_property
    def _digest(self) -> bytes:
        return hashlib.sha256(self.master_seed.to_bytes(32, "big") + self.image_id.encode("utf-8")).digest()

    def material(self) -> list[int]:
        d = self._digest
        return [int.from_bytes(d[i:i + 4], "little") for i in range(0, 32, 4)]

    def traversal_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.material(), spawn_key=(0,))))

    def window_seed(self, entry: int, channel: int) -> int:
        """128-bit Philox key for one plan entry and channel."""
        msg = self._digest + b"window" + entry.to_bytes(8, "big") + channel.to_bytes(4, "big")
        return int.from_bytes(hashlib.sha256(msg).digest()[:16], "little")


@dataclass(frozen=True)
class PlanEntry:
    region: Region
    ws: int
    seeds: tuple[int, ...]


@dataclass
class ShufflePlan:
    width: int
    height: int
    channels: int
    ws_lower: int
    ws_upper: int
    initial_ws: int
    floor_ws: int
    vfe_median: float
    channel_mode: str = "spatial"
    entries: list[PlanEntry] = field(default_factory=list)
    iterations: int = 0

    @property
    def bounds(self) -> tuple[int, int]:
        return self.ws_lower, self.ws_upper

    def to_text(self) -> str:
        lines = [
            f"{PLAN_FORMAT} {PLAN_VERSION}",
            f"size {self.width} {self.height} {self.channels}",
            f"bounds {self.ws_lower} {self.ws_upper}",
            f"windows {self.initial_ws} {self.floor_ws}",
            f"vfe_median {self.vfe_median!r}",
            f"channel_mode {self.channel_mode}",
            f"entries {len(self.entries)}",
        ]
        for e in self.entries:
            r = e.region
            seeds = " ".join(f"{s:032x}" for s in e.seeds)
            lines.append(f"{r.x0} {r.y0} {r.w} {r.h} {e.ws} {seeds}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ShufflePlan":
        lines = text.splitlines()
        try:
            fmt, ver = lines[0].split()
            if fmt != PLAN_FORMAT or int(ver) != PLAN_VERSION:
                raise MixerError(f"unsupported plan header {lines[0]!r}")
            head = {}
            for ln in lines[1:7]:
                k, *vals = ln.split()
                head[k] = vals
            w, h, c = map(int, head["size"])
            ws_l, ws_u = map(int, head["bounds"])
            ws0, lo = map(int, head["windows"])
            n = int(head["entries"][0])
            entries = []
            for ln in lines[7:7 + n]:
                parts = ln.split()
                x0, y0, rw, rh, ws = map(int, parts[:5])
                entries.append(PlanEntry(Region(x0, y0, rw, rh), ws, tuple(int(s, 16) for s in parts[5:])))
            if len(entries) != n:
                raise MixerError("truncated plan")
        except (IndexError, KeyError, ValueError) as exc:
            raise MixerError(f"malformed plan: {exc}") from exc
        return cls(w, h, c, ws_l, ws_u, ws0, lo, float(head["vfe_median"][0]), head["channel_mode"][0], entries)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("ascii")).hexdigest()


def _pow2_floor(x: int) -> int:
    """2 ** floor(log2 x) for integer x >= 1."""
    return 1 << (int(x).bit_length() - 1)


def initial_ws(image_size: int, ws_u: int) -> int:
    """Halve to powers of two, starting at `image_size`, until ws <= ws_u."""
    if ws_u < 3:
        raise MixerError("upper window bound must be >= 3")
    ws = int(image_size)
    while ws > ws_u:
        ws = _pow2_floor(ws // 2)
    return ws


def _bounds_of(bounds) -> tuple[int, int]:
    if hasattr(bounds, "ws_lower"):
        return int(bounds.ws_lower), int(bounds.ws_upper)
    ws_l, ws_u = bounds
    return int(ws_l), int(ws_u)


def plan_image(t: ImageTensor, bounds, key: MixKey, channel_mode: str = "spatial") -> ShufflePlan:
    """Build the adaptive shuffle plan for `t`.

    Regions of the initial tiling are drawn in key-determined random order.
    A region no larger than the power-of-two floor of ws_l is shuffled at that
    floor. Otherwise ws becomes ceil(size / 2); the region is shuffled at ws
    (never below the floor) when its VFE is at most the median VFE of the
    initial tiling, and is otherwise split at ws and returned to the worklist.
    """
    ws_l, ws_u = _bounds_of(bounds)
    if ws_l < 2:
        raise MixerError("lower window bound must be >= 2")
    if channel_mode not in CHANNEL_MODES:
        raise MixerError(f"unknown channel mode {channel_mode!r}")
    ws0 = initial_ws(max(t.width, t.height), ws_u)
    if ws_l > ws0:
        raise MixerError(f"infeasible bounds: ws_l={ws_l} exceeds initial window {ws0}")
    lo = _pow2_floor(ws_l)

    work = split_regions(t, ws0)
    initial = np.sum([tiled_vfe(t.channel(c), ws0) for c in range(t.channels)], axis=0) / t.channels
    vfe_m = lower_median(initial)
    known = dict(zip(work, initial.tolist()))
    rng = key.traversal_rng()
    nseeds = 2 if channel_mode == "rotate" else t.channels

    plan = ShufflePlan(t.width, t.height, t.channels, ws_l, ws_u, ws0, lo, vfe_m, channel_mode)

    def emit(r: Region, ws: int):
        idx = len(plan.entries)
        seeds = tuple(key.window_seed(idx, c) for c in range(nseeds))
        plan.entries.append(PlanEntry(r, min(ws, r.size), seeds))

    while work:
        plan.iterations += 1
        i = int(rng.integers(len(work)))
        r = work[i]
        work[i] = work[-1]
        work.pop()
        size = r.size
        if size <= lo:
            emit(r, lo)
            continue
        ws = -(-size // 2)
        vfe = known.pop(r) if r in known else mean_region_vfe(t, r)
        if vfe <= vfe_m:
            # halving a non power-of-two region can undershoot the floor
            emit(r, max(ws, lo))
        else:
            work.extend(subdivide(r, ws))
    return plan


# ---------------------------------------------------------------- permutations

def window_permutation(h: int, w: int, ws: int, seed: int) -> np.ndarray:
    """Flat gather indices shuffling each ws x ws window of an h x w block.

    out.ravel() = block.ravel()[perm]. Each window (border windows at their
    true size) gets an independent uniform permutation, drawn by sorting a
    counter-based Philox stream keyed on `seed` within window groups.
    """
    n = h * w
    ws = max(1, min(ws, max(h, w)))
    if ws == 1:
        return np.arange(n)
    ncols = -(-w // ws)
    labels = ((np.arange(h) // ws)[:, None] * ncols + (np.arange(w) // ws)[None, :]).ravel()
    gen = np.random.Generator(np.random.Philox(key=seed & (2**128 - 1)))
    keys = gen.integers(0, 2**63 - 1, size=n, dtype=np.int64, endpoint=True)
    src = np.lexsort((keys, labels))
    dst = np.argsort(labels, kind="stable")
    perm = np.empty(n, dtype=np.int64)
    perm[dst] = src
    return perm


def channel_rotation(n: int, channels: int, seed: int) -> np.ndarray:
    """Per-pixel channel permutations, shape n x channels."""
    gen = np.random.Generator(np.random.Philox(key=seed & (2**128 - 1)))
    return np.argsort(gen.random((n, channels)), axis=1, kind="stable")


def _shuffle_block(block: np.ndarray, ws: int, seeds, channel_mode: str = "spatial") -> np.ndarray:
    """Shuffle a C x h x w block window-by-window and return the new block."""
    c, h, w = block.shape
    flat = block.reshape(c, h * w)
    out = np.empty_like(flat)
    if channel_mode == "spatial":
        for ch in range(c):
            out[ch] = flat[ch][window_permutation(h, w, ws, seeds[ch])]
    else:
        perm = window_permutation(h, w, ws, seeds[0])
        moved = flat[:, perm]
        rot = channel_rotation(h * w, c, seeds[1])
        out = np.take_along_axis(moved, rot.T, axis=0)
    return out.reshape(c, h, w)


def _unshuffle_block(block: np.ndarray, ws: int, seeds, channel_mode: str = "spatial") -> np.ndarray:
    c, h, w = block.shape
    flat = block.reshape(c, h * w)
    out = np.empty_like(flat)
    if channel_mode == "spatial":
        for ch in range(c):
            out[ch][window_permutation(h, w, ws, seeds[ch])] = flat[ch]
    else:
        perm = window_permutation(h, w, ws, seeds[0])
        rot = channel_rotation(h * w, c, seeds[1])
        moved = np.empty_like(flat)
        np.put_along_axis(moved, rot.T, flat, axis=0)
        out[:, perm] = moved
    return out.reshape(c, h, w)


def shuffle_window(t: ImageTensor, region: Region, ws: int, seeds, channel_mode: str = "spatial") -> ImageTensor:
    """Return a copy of `t` with `region` shuffled window-by-window.

    Spatial mode draws one permutation per window and channel from the seed of
    that channel; border windows keep their true size.
    """
    if not region.fits(t.width, t.height):
        raise MixerError(f"{region} does not fit a {t.width}x{t.height} image")
    need = 2 if channel_mode == "rotate" else t.channels
    if len(seeds) != need:
        raise MixerError(f"expected {need} seeds, got {len(seeds)}")
    out = np.array(t.data)
    ys, xs = region.slices
    out[:, ys, xs] = _shuffle_block(out[:, ys, xs], ws, seeds, channel_mode)
    return ImageTensor(out)


def _check_plan(t: ImageTensor, plan: ShufflePlan):
    if (t.width, t.height, t.channels) != (plan.width, plan.height, plan.channels):
        raise PlanMismatchError(
            f"plan is for {plan.width}x{plan.height}x{plan.channels}, image is {t.width}x{t.height}x{t.channels}")


def apply_plan(t: ImageTensor, plan: ShufflePlan) -> ImageTensor:
    _check_plan(t, plan)
    out = np.array(t.data)
    for e in plan.entries:
        ys, xs = e.region.slices
        out[:, ys, xs] = _shuffle_block(out[:, ys, xs], e.ws, e.seeds, plan.channel_mode)
    return ImageTensor(out)


def invert_image(t_shuffled: ImageTensor, plan: ShufflePlan) -> ImageTensor:
    _check_plan(t_shuffled, plan)
    out = np.array(t_shuffled.data)
    for e in reversed(plan.entries):
        ys, xs = e.region.slices
        out[:, ys, xs] = _unshuffle_block(out[:, ys, xs], e.ws, e.seeds, plan.channel_mode)
    return ImageTensor(out)


def obfuscate_image(t: ImageTensor, bounds, key: MixKey, channel_mode: str = "spatial"):
    plan = plan_image(t, bounds, key, channel_mode)
    return apply_plan(t, plan), plan


def uniform_shuffle(t: ImageTensor, ws: int, key: MixKey) -> tuple[ImageTensor, ShufflePlan]:
    """Shuffle every window of a fixed ws x ws grid (no VFE guidance)."""
    plan = ShufflePlan(t.width, t.height, t.channels, ws, ws, ws, ws, 0.0)
    for r in tile(0, 0, t.width, t.height, ws):
        idx = len(plan.entries)
        plan.entries.append(PlanEntry(r, min(ws, r.size), tuple(key.window_seed(idx, c) for c in range(t.channels))))
    return apply_plan(t, plan), plan


def mean_ws_used(plan: ShufflePlan, region_filter=None) -> float:
    """Pixel-weighted mean window size over plan entries."""
    num = den = 0
    for e in plan.entries:
        if region_filter is not None and not region_filter(e.region):
            continue
        num += e.ws * e.region.area
        den += e.region.area
    return num / den if den else float("nan")


# ---------------------------------------------------------------- dataset mode

@dataclass(frozen=True)
class MixerConfig:
    master_seed: int
    ws_lower: int
    ws_upper: int
    threads: int = 1
    channel_mode: str = "spatial"
    plan_dir: str | None = None

    def digest(self) -> str:
        text = f"ws_lower={self.ws_lower};ws_upper={self.ws_upper};channel_mode={self.channel_mode};plan={PLAN_VERSION}"
        return hashlib.sha256(text.encode("ascii")).hexdigest()


@dataclass
class ImageRecord:
    image_id: str
    relpath: str
    plan_digest: str
    region_count: int
    vfe_before: float
    vfe_after: float
    mean_ws: float


@dataclass
class DatasetSummary:
    key_file: Path
    records: list[ImageRecord] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.records)

    def _mean(self, attr):
        vals = [getattr(r, attr) for r in self.records]
        return sum(vals) / len(vals) if vals else float("nan")

    @property
    def mean_vfe_before(self) -> float:
        return self._mean("vfe_before")

    @property
    def mean_vfe_after(self) -> float:
        return self._mean("vfe_after")

    @property
    def mean_ws_used(self) -> float:
        return self._mean("mean_ws")

    def lines(self) -> list[str]:
        return [
            f"count={self.count} failed={len(self.failures)}",
            f"mean_vfe_before={self.mean_vfe_before!r} mean_vfe_after={self.mean_vfe_after!r}",
            f"mean_ws_used={self.mean_ws_used!r}",
        ]


def find_images(root) -> list[Path]:
    root = Path(root)
    return sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in READ_EXTENSIONS)


def _process_one(path: Path, in_dir: Path, out_dir: Path, config: MixerConfig) -> ImageRecord:
    rel = path.relative_to(in_dir).as_posix()
    key = MixKey(config.master_seed, image_id_for(rel))
    t = load_image(path)
    shuffled, plan = obfuscate_image(t, (config.ws_lower, config.ws_upper), key, config.channel_mode)
    target = out_dir / Path(rel).with_suffix(".png")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_image(shuffled, target)
    if config.plan_dir:
        pfile = Path(config.plan_dir) / Path(rel).with_suffix(".plan")
        pfile.parent.mkdir(parents=True, exist_ok=True)
        pfile.write_text(plan.to_text())
    return ImageRecord(key.image_id, rel, plan.digest(), len(plan.entries),
                       global_vfe(t), global_vfe(shuffled), mean_ws_used(plan))


def write_key_file(path: Path, config: MixerConfig, records: list[ImageRecord]) -> None:
    lines = [
        f"{KEYFILE_FORMAT} {KEYFILE_VERSION}",
        f"master_seed {config.master_seed:064x}",
        f"bounds {config.ws_lower} {config.ws_upper}",
        f"config_digest {config.digest()}",
        f"images {len(records)}",
    ]
    for r in records:
        lines.append(f"{r.image_id}\t{r.relpath}\t{r.plan_digest}\t{r.region_count}")
    path.write_text("\n".join(lines) + "\n")


def read_key_file(path) -> dict:
    lines = Path(path).read_text().splitlines()
    fmt, ver = lines[0].split()
    if fmt != KEYFILE_FORMAT or int(ver) != KEYFILE_VERSION:
        raise MixerError(f"unsupported key file header {lines[0]!r}")
    seed = int(lines[1].split()[1], 16)
    ws_l, ws_u = map(int, lines[2].split()[1:])
    n = int(lines[4].split()[1])
    records = []
    for ln in lines[5:5 + n]:
        image_id, rel, digest, count = ln.split("\t")
        records.append((image_id, rel, digest, int(count)))
    return {"master_seed": seed, "bounds": (ws_l, ws_u), "config_digest": lines[3].split()[1], "records": records}


def obfuscate_dataset(in_dir, out_dir, config: MixerConfig) -> DatasetSummary:
    """Shuffle every supported image under `in_dir` into PNGs under `out_dir`.

    Writes a key file into `out_dir`. Per-file failures are logged and skipped.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if not in_dir.is_dir():
        raise MixerError(f"input directory {in_dir} not found")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = find_images(in_dir)
    summary = DatasetSummary(out_dir / KEYFILE_NAME)

    def work(p):
        try:
            return p, _process_one(p, in_dir, out_dir, config), None
        except Exception as exc:  # per-file isolation
            return p, None, exc

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, paths))
    else:
        results = [work(p) for p in paths]
    for p, rec, exc in results:
        if exc is not None:
            log.error("%s: %s", p, exc)
            summary.failures.append((str(p), str(exc)))
        else:
            summary.records.append(rec)
    write_key_file(summary.key_file, config, summary.records)
    return summary

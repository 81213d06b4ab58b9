"""Window-size bounds.

The lower bound comes from the normal approximation of the VFE of an image
whose windows were shuffled; the upper bound from the probability that the
output deviation of a conv + max-pool block stays below a threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

MAX_WS = 256
DEFAULT_SEED = 20240917
DEFAULT_SAMPLES = 1_000_000
DEFAULT_SHARDS = 8

# Subset expressions in the order they are reported, empty sum first.
SUBSET_ORDER: tuple[tuple[int, ...], ...] = (
    (),
    (1,), (2,), (3,), (4,),
    (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4),
    (1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4),
    (1, 2, 3, 4),
)

# Monotone sign vectors over w1 >= w2 >= w3 >= w4.
SIGN_PATTERNS: tuple[tuple[int, int, int, int], ...] = (
    (1, 1, 1, 1),
    (1, 1, 1, -1),
    (1, 1, -1, -1),
    (1, -1, -1, -1),
    (-1, -1, -1, -1),
)

# Counts of the maximum output B over 512 binary 3x3 inputs x 5 sign patterns.
REFERENCE_TABLE: dict[tuple[int, ...], int] = {
    (): 200,
    (1,): 457, (2,): 212, (3,): 70, (4,): 9,
    (1, 2): 473, (1, 3): 247, (1, 4): 60, (2, 3): 140, (2, 4): 15, (3, 4): 3,
    (1, 2, 3): 411, (1, 2, 4): 92, (1, 3, 4): 28, (2, 3, 4): 5,
    (1, 2, 3, 4): 138,
}


class CalibrationError(ValueError):
    pass


def subset_label(subset) -> str:
    if not subset:
        return "0"
    return " + ".join(f"w{i}" for i in subset)


@dataclass(frozen=True)
class KernelModel:
    """Normal weight model for the 2x2 conv / 2x2 max-pool base case."""

    mu_w: float = 0.0
    sigma_w: float = 1.0
    kernel_size: int = 2
    conv_stride: int = 1
    pool_size: int = 2
    pool_stride: int = 2

    def __post_init__(self):
        if not (self.sigma_w > 0 and math.isfinite(self.sigma_w) and math.isfinite(self.mu_w)):
            raise CalibrationError("sigma_w must be positive and both moments finite")
        if (self.kernel_size, self.conv_stride, self.pool_size, self.pool_stride) != (2, 1, 2, 2):
            raise CalibrationError("only the 2x2 kernel / stride 1 / 2x2 pool base case is modelled")


@dataclass(frozen=True)
class ShuffleDistributionModel:
    mean: float
    variance: float


@dataclass(frozen=True)
class CalibrationResult:
    ws_lower: int
    ws_upper: int
    alpha0: float
    alpha: float
    d: float
    m: float
    target_vfe: float | None = None
    quantile: float = 0.5
    ws0: int = 3

    @property
    def feasible(self) -> bool:
        return self.ws_upper >= self.ws_lower

    def to_record(self) -> str:
        fields = [
            ("ws_lower", self.ws_lower), ("ws_upper", self.ws_upper),
            ("alpha0", repr(self.alpha0)), ("alpha", repr(self.alpha)),
            ("d", repr(self.d)), ("m", repr(self.m)),
            ("target_vfe", repr(self.target_vfe)), ("q", repr(self.quantile)),
            ("ws0", self.ws0), ("feasible", str(self.feasible).lower()),
        ]
        return " ".join(f"{k}={v}" for k, v in fields)


# ---------------------------------------------------------------- lower bound

def vfe_shuffle_distribution(ws: int, w: int, h: int) -> ShuffleDistributionModel:
    """Normal approximation of the VFE of a standardized image shuffled at `ws`.

    mean = 2 ws (ws - 1), variance = 4 ws^3 (ws - 1) / (w h).
    """
    if ws < 2:
        raise CalibrationError("window size must be >= 2")
    if w * h <= 0:
        raise CalibrationError("image area must be positive")
    return ShuffleDistributionModel(
        mean=float(2 * ws * (ws - 1)),
        variance=(4 * ws**3 * (ws - 1)) / (w * h),
    )


def lower_bound_ws(target_vfe: float, w: int, h: int, confidence: float = 0.5) -> int:
    """Smallest ws >= 2 whose shuffled VFE exceeds `target_vfe` with probability >= confidence."""
    if not target_vfe > 0:
        raise CalibrationError("target VFE must be positive")
    if not 0 < confidence < 1:
        raise CalibrationError("confidence quantile must lie in (0, 1)")
    z = 0.0 if confidence == 0.5 else float(stats.norm.ppf(confidence))
    for ws in range(2, MAX_WS + 1):
        dist = vfe_shuffle_distribution(ws, w, h)
        if dist.mean - z * math.sqrt(dist.variance) >= target_vfe:
            return ws
    raise CalibrationError(f"no window size <= {MAX_WS} reaches target VFE {target_vfe}")


# ---------------------------------------------------------------- induction table

def _placement_masks(layout) -> np.ndarray:
    """Bit mask of covered weights for each of 512 inputs and 4 kernel placements."""
    imgs = np.array(list(itertools.product((0, 1), repeat=9)), dtype=np.int64).reshape(512, 3, 3)
    masks = np.zeros((512, 4), dtype=np.int64)
    for p, (r, c) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        for k, (dr, dc) in enumerate(layout):
            masks[:, p] |= imgs[:, r + dr, c + dc] << k
    return masks


# Kernel cell holding w1..w4, as (row, col): W = [[w1, w2], [w3, w4]].
KERNEL_LAYOUT = ((0, 0), (0, 1), (1, 0), (1, 1))


def representative_kernel(signs) -> np.ndarray:
    """Concrete sorted kernel for a sign pattern.

    Positive weights take magnitudes 4, 3, 2, 1 from the top; negative weights
    take -1, -2, -3, -4 from the bottom of the positive run. Magnitudes are
    then perturbed by distinct powers of two so no two subset sums tie.
    """
    npos = sum(1 for s in signs if s > 0)
    pos = [float(npos - i) for i in range(npos)]
    neg = [-float(j + 1) for j in range(4 - npos)]
    w = np.array(pos + neg)
    w += np.array([2.0**-5, 2.0**-6, 2.0**-7, 2.0**-8])
    return w


def enumerate_induction_table(kernel_for=representative_kernel, layout=KERNEL_LAYOUT) -> dict[tuple[int, ...], int]:
    """Count which weight subset realizes the pooled output B.

    All 512 binary 3x3 inputs are combined with the five monotone sign patterns
    of a sorted 2x2 kernel. For each case the kernel is slid at stride 1 (four
    placements) and the 2x2 max-pool keeps the largest response; the subset of
    weights that landed on ones in that placement is tallied.
    """
    masks = _placement_masks(layout)
    bits = np.array([[(m >> k) & 1 for k in range(4)] for m in range(16)], dtype=np.float64)
    mask_to_subset = [tuple(k + 1 for k in range(4) if (m >> k) & 1) for m in range(16)]
    counts = dict.fromkeys(SUBSET_ORDER, 0)
    rows = np.arange(512)
    for signs in SIGN_PATTERNS:
        w = np.asarray(kernel_for(signs), dtype=np.float64)
        if np.any(np.sign(w) != np.array(signs)) or np.any(np.diff(w) > 0):
            raise CalibrationError(f"kernel {w} does not match sorted sign pattern {signs}")
        responses = (bits @ w)[masks]
        winners = masks[rows, responses.argmax(axis=1)]
        for m, n in zip(*np.unique(winners, return_counts=True)):
            counts[mask_to_subset[m]] += int(n)
    return counts


def format_table(counts: dict[tuple[int, ...], int]) -> list[str]:
    total = sum(counts.values())
    lines = ["B\tNumber\tPercentage"]
    for subset in SUBSET_ORDER:
        n = counts.get(subset, 0)
        lines.append(f"{subset_label(subset)}\t{n}\t{100.0 * n / total:.1f}%")
    return lines


# ---------------------------------------------------------------- upper bound

def _shard_generators(seed: int, shards: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(shards)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _shard_sizes(n: int, shards: int) -> list[int]:
    base, extra = divmod(n, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def diff_max_samples(km: KernelModel, n: int, seed: int = DEFAULT_SEED,
                     shards: int = DEFAULT_SHARDS) -> np.ndarray:
    """Extremal output deviation sum(w > 0) - sum(w < 0) for n sampled kernels."""
    parts = []
    for gen, size in zip(_shard_generators(seed, shards), _shard_sizes(n, shards)):
        w = gen.normal(km.mu_w, km.sigma_w, size=(size, 4))
        parts.append(np.where(w > 0, w, 0.0).sum(axis=1) - np.where(w < 0, w, 0.0).sum(axis=1))
    return np.concatenate(parts)


def _table_pair_samples(km: KernelModel, n: int, seed: int, shards: int) -> np.ndarray:
    # experimental: B and B' drawn independently from the table frequencies
    freq = np.array([REFERENCE_TABLE[s] for s in SUBSET_ORDER], dtype=np.float64)
    freq /= freq.sum()
    sel = np.array([[1.0 if k + 1 in s else 0.0 for k in range(4)] for s in SUBSET_ORDER])
    parts = []
    for gen, size in zip(_shard_generators(seed, shards), _shard_sizes(n, shards)):
        w = -np.sort(-gen.normal(km.mu_w, km.sigma_w, size=(size, 4)), axis=1)
        a = gen.choice(len(SUBSET_ORDER), size=size, p=freq)
        b = gen.choice(len(SUBSET_ORDER), size=size, p=freq)
        parts.append(np.abs(((sel[a] - sel[b]) * w).sum(axis=1)))
    return np.concatenate(parts)


def estimate_alpha0(d: float, km: KernelModel = KernelModel(), n: int = DEFAULT_SAMPLES,
                    seed: int = DEFAULT_SEED, shards: int = DEFAULT_SHARDS,
                    method: str = "extremal") -> float:
    """Monte-Carlo estimate of P(diff_max <= d) for one 2x2 window.

    `method="extremal"` uses the all-ones / all-zeros bound, i.e. diff_max =
    sum |w_i|. `method="table"` is experimental: it draws the subsets realizing
    B and B' from the induction-table frequencies.
    """
    if n < 10_000:
        raise CalibrationError("need at least 10^4 samples")
    if not d >= 0 or math.isnan(d):
        raise CalibrationError("threshold d must be non-negative")
    if method == "extremal":
        diffs = diff_max_samples(km, n, seed, shards)
    elif method == "table":
        diffs = _table_pair_samples(km, n, seed, shards)
    else:
        raise CalibrationError(f"unknown method {method!r}")
    return float(np.count_nonzero(diffs <= d)) / n


def growth_term(alpha: float, alpha0: float) -> float:
    """m = sqrt(log_alpha0(alpha))."""
    if not 0 < alpha0 < 1:
        raise CalibrationError("alpha0 must lie strictly between 0 and 1")
    if not 0 < alpha < 1:
        raise CalibrationError("alpha must lie strictly between 0 and 1")
    if alpha > alpha0:
        raise CalibrationError(f"target confidence alpha={alpha} exceeds single-window alpha0={alpha0}")
    return math.sqrt(math.log(alpha) / math.log(alpha0))


def upper_bound_ws(alpha: float, alpha0: float, ws0: int = 3) -> tuple[float, int]:
    """Return (m, ws0 + 2 * floor(m))."""
    m = growth_term(alpha, alpha0)
    # log ratios of exact powers land a few ulps below the integer
    fm = math.floor(m + 1e-9)
    return m, ws0 + 2 * fm


def calibrate(*, d: float, alpha: float, target_vfe: float, width: int, height: int,
              km: KernelModel = KernelModel(), quantile: float = 0.5, n: int = DEFAULT_SAMPLES,
              seed: int = DEFAULT_SEED, shards: int = DEFAULT_SHARDS, ws0: int = 3,
              method: str = "extremal") -> CalibrationResult:
    alpha0 = estimate_alpha0(d, km, n, seed, shards, method)
    m, ws_u = upper_bound_ws(alpha, alpha0, ws0)
    ws_l = lower_bound_ws(target_vfe, width, height, quantile)
    return CalibrationResult(ws_lower=ws_l, ws_upper=ws_u, alpha0=alpha0, alpha=alpha, d=d, m=m,
                             target_vfe=target_vfe, quantile=quantile, ws0=ws0)

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import ndimage

from visualmixer.corpus import corpus_dir
from visualmixer.imagecore import DegenerateRegionError, ImageTensor, Region, load_image, split_regions
from visualmixer.mixer import MixKey, uniform_shuffle
from visualmixer.vfe import (
    VfeConfig, global_vfe, gradient_energy, image_vfe, lower_median, multichannel_vfe,
    normalized_region_statistic, normalized_samples_statistic, region_vfe, tiled_vfe, vfe_report,
)

from conftest import random_tensor

STEP = ImageTensor(np.array([[[0, 1], [0, 1]]], dtype=np.uint8))


def test_constant_region_is_zero():
    t = ImageTensor(np.full((1, 5, 6), 77, dtype=np.uint8))
    assert region_vfe(t, Region(0, 0, 6, 5), 0) == 0
    assert image_vfe(t, 0, 3) == 0


def test_two_by_two_hand_example():
    assert region_vfe(STEP, Region(0, 0, 2, 2), 0) == 2
    assert image_vfe(STEP, 0, 2) == 0.5
    assert image_vfe(STEP, 0, 2, VfeConfig(2.0)) == 1.0


def test_single_pixel_region():
    assert region_vfe(STEP, Region(1, 1, 1, 1), 0) == 0


def test_scale_factor_must_be_positive():
    with pytest.raises(ValueError):
        VfeConfig(0.0)


def test_term_counts_follow_border_clamp():
    # a checkerboard of 0/1 makes every neighbour pair contribute exactly 1
    for h, w in [(3, 5), (8, 8), (1, 7)]:
        board = (np.add.outer(np.arange(h), np.arange(w)) % 2).astype(np.uint8)
        assert gradient_energy(board) == h * (w - 1) + w * (h - 1)


def test_multichannel_is_channel_mean(rng):
    gray = random_tensor(rng, 1, 9, 7)
    assert multichannel_vfe(gray, 4) == image_vfe(gray, 0, 4)
    two = random_tensor(rng, 2, 9, 7)
    a, b = image_vfe(two, 0, 4), image_vfe(two, 1, 4)
    assert multichannel_vfe(two, 4) == pytest.approx((a + b) / 2, rel=1e-15)
    same = ImageTensor(np.repeat(gray.data, 3, axis=0))
    assert multichannel_vfe(same, 4) == image_vfe(gray, 0, 4)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_tiled_route_matches_region_route(h, w, ws, seed):
    t = random_tensor(np.random.default_rng(seed), 1, h, w)
    fast = tiled_vfe(t.channel(0), ws)
    slow = [region_vfe(t, r, 0) for r in split_regions(t, ws)]
    assert fast.tolist() == slow


@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**32 - 1), st.integers(-50, 50))
def test_offset_invariance(h, w, seed, offset):
    gen = np.random.default_rng(seed)
    base = gen.integers(60, 190, size=(h, w))
    assert gradient_energy(base) == gradient_energy(base + offset)


@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_quadratic_scaling(h, w, seed, k):
    gen = np.random.default_rng(seed)
    base = gen.integers(0, 64, size=(1, h, w))
    t, tk = ImageTensor(base), ImageTensor(base * k)
    r = Region(0, 0, w, h)
    assert region_vfe(tk, r, 0) == k * k * region_vfe(t, r, 0)


def test_normalized_statistic_arithmetic():
    # samples {0, 1, 0, 1} along a row: var = 1/3, energy = 3
    px = np.array([[0.0, 1.0, 0.0, 1.0]])
    assert normalized_samples_statistic(px) == pytest.approx(3 / (2 / 3), rel=1e-15)
    scaled = np.array([[0.0, 1.0, 0.0, 1.0]]) * np.sqrt(1.5)
    # var = 0.5, energy = 4.5 -> 4.5 / 1.0
    assert normalized_samples_statistic(scaled) == pytest.approx(4.5, rel=1e-12)


def test_normalized_statistic_constant_region():
    with pytest.raises(DegenerateRegionError):
        normalized_region_statistic(ImageTensor(np.zeros((1, 2, 2), dtype=np.uint8)), Region(0, 0, 2, 2), 0)


@pytest.mark.parametrize("ws,trials", [(2, 20000), (8, 10000)])
def test_shuffled_normal_mean_matches_df(ws, trials):
    gen = np.random.Generator(np.random.Philox(7))
    df = 2 * ws * (ws - 1)
    vals = [normalized_samples_statistic(gen.permutation(gen.standard_normal(ws * ws)).reshape(ws, ws))
            for _ in range(trials)]
    assert np.mean(vals) == pytest.approx(df, rel=0.02)


def test_lower_median_is_order_statistic():
    assert lower_median([4, 1, 3, 2]) == 2
    assert lower_median([5.0]) == 5.0
    with pytest.raises(ValueError):
        lower_median([])


def test_report_constant_image():
    rep = vfe_report(ImageTensor(np.full((3, 8, 8), 3, dtype=np.uint8)), 4)
    assert all(v == 0 for _, _, v in rep.per_region)
    assert rep.median_region_vfe == 0 and rep.multichannel_vfe == 0


def test_report_textured_half_above_flat_half(rng):
    img = np.full((1, 16, 16), 128, dtype=np.uint8)
    img[0, :, :8] = rng.integers(0, 256, size=(16, 8))
    rep = vfe_report(ImageTensor(img), 4)
    for r, _, v in rep.per_region:
        if r.x0 < 8:
            assert v > rep.median_region_vfe
        else:
            assert v <= rep.median_region_vfe


@given(st.integers(1, 3), st.integers(1, 20), st.integers(1, 20), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_report_consistency(c, h, w, ws, seed):
    t = random_tensor(np.random.default_rng(seed), c, h, w)
    cfg = VfeConfig(1.5)
    rep = vfe_report(t, ws, cfg)
    for ch in range(c):
        total = sum(v for _, cc, v in rep.per_region if cc == ch)
        assert rep.channel_vfe[ch] == pytest.approx(cfg.scale_factor * total / (w * h), rel=1e-9, abs=1e-12)
        assert rep.channel_vfe[ch] == pytest.approx(image_vfe(t, ch, ws, cfg), rel=1e-12, abs=1e-12)
    averaged = [np.mean([v for rr, _, v in rep.per_region if rr == r]) for r in split_regions(t, ws)]
    assert rep.median_region_vfe in averaged
    lines = rep.to_lines()
    assert lines[1] == "x0,y0,w,h,channel,vfe"
    assert len(lines) == 3 + len(rep.per_region)


def _smooth_field(gen, size=32):
    noise = gen.standard_normal((3, size, size))
    field = np.stack([ndimage.gaussian_filter(ch, 2.0) for ch in noise])
    field = (field - field.min()) / np.ptp(field)
    return ImageTensor(np.round(field * 255).astype(np.uint8))


def test_shuffle_raises_mean_vfe_on_smooth_fields():
    gen = np.random.Generator(np.random.Philox(99))
    before = after = 0.0
    for i in range(200):
        t = _smooth_field(gen)
        shuffled, _ = uniform_shuffle(t, 4, MixKey(5, f"field{i}"))
        before += global_vfe(t)
        after += global_vfe(shuffled)
    assert after >= before


def test_shuffle_raises_mean_vfe_on_corpus():
    paths = sorted(corpus_dir("natural").glob("*.png"))
    assert len(paths) >= 100
    before = after = 0.0
    for p in paths:
        t = load_image(p)
        shuffled, _ = uniform_shuffle(t, 4, MixKey(5, p.name))
        before += global_vfe(t)
        after += global_vfe(shuffled)
    assert after >= before

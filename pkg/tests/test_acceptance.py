"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest; pytest
also repeats the lines in its terminal summary.
"""

import contextlib
import io
import math
import time

import mpmath as mp
import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import stats

from visualmixer.attack import attack_sweep, search_space
from visualmixer.calibration import estimate_alpha0, upper_bound_ws, vfe_shuffle_distribution
from visualmixer.cli import dispatch
from visualmixer.corpus import corpus_dir
from visualmixer.imagecore import ImageTensor, Region, tile
from visualmixer.mixer import (
    MixKey, PlanEntry, ShufflePlan, initial_ws, invert_image, obfuscate_image, plan_image,
)
from visualmixer.stadam import (
    OptimizerState, StAdamParams, adam_step, optimize, quadratic, quadratic_grad, st_adam_step,
)
from visualmixer.vfe import normalized_samples_statistic

RESULTS: dict[int, tuple[bool, str]] = {}

EXPECTED_TABLE = [
    ("0", 200), ("w1", 457), ("w2", 212), ("w3", 70), ("w4", 9),
    ("w1 + w2", 473), ("w1 + w3", 247), ("w1 + w4", 60), ("w2 + w3", 140), ("w2 + w4", 15), ("w3 + w4", 3),
    ("w1 + w2 + w3", 411), ("w1 + w2 + w4", 92), ("w1 + w3 + w4", 28), ("w2 + w3 + w4", 5),
    ("w1 + w2 + w3 + w4", 138),
]


def report(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def summary_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'} {d}" for n, (ok, d) in sorted(RESULTS.items())]


def test_criterion_01_induction_table():
    start = time.perf_counter()
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = dispatch(["table1"])
    elapsed = time.perf_counter() - start
    rows = [tuple(line.split("\t")[:2]) for line in buf.getvalue().splitlines()[1:]]
    got = [(label, int(n)) for label, n in rows]
    mismatched = [f"{lbl}:{n}!={e}" for (lbl, n), (_, e) in zip(got, EXPECTED_TABLE) if n != e]
    ok = code == 0 and len(got) == 16 and got == EXPECTED_TABLE and elapsed < 5
    report(1, ok, f"rows={len(got)} total={sum(n for _, n in got)} mismatched={len(mismatched)} "
                  f"[{' '.join(mismatched)}] runtime={elapsed:.2f}s")


def test_criterion_02_chi_square_law():
    start = time.perf_counter()
    gen = np.random.Generator(np.random.Philox(20240917))
    parts, ok = [], True
    for ws in (2, 4, 8):
        df = 2 * ws * (ws - 1)
        vals = np.array([
            normalized_samples_statistic(gen.permutation(gen.standard_normal(ws * ws)).reshape(ws, ws))
            for _ in range(5000)
        ])
        p = stats.kstest(vals, stats.chi2(df).cdf).pvalue
        mean_ok = abs(vals.mean() - df) <= 0.02 * df
        ok &= bool(p > 0.01 and mean_ok)
        parts.append(f"ws={ws} df={df} mean={vals.mean():.3f} ks_p={p:.3g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    report(2, ok, "; ".join(parts) + f" runtime={elapsed:.1f}s")


def test_criterion_03_shuffle_distribution():
    d = vfe_shuffle_distribution(8, 224, 224)
    ok = d.mean == 112 and abs(d.variance - 2 / 7) <= 1e-15
    report(3, ok, f"mean={d.mean!r} variance={d.variance!r}")


def test_criterion_04_permutation_soundness():
    gen = np.random.Generator(np.random.Philox(4))
    bad_multiset = bad_inverse = 0
    for i in range(50):
        h, w = (int(v) for v in gen.integers(8, 97, size=2))
        c = int(gen.choice([1, 3]))
        t = ImageTensor(gen.integers(0, 256, size=(c, h, w), dtype=np.uint8))
        ws_u = int(gen.integers(3, 17))
        ws_l = int(gen.integers(2, initial_ws(max(w, h), ws_u) + 1))
        shuffled, plan = obfuscate_image(t, (ws_l, ws_u), MixKey(int(gen.integers(2**62)), f"fixture{i}"))
        for e in plan.entries:
            for win in tile(e.region.x0, e.region.y0, e.region.w, e.region.h, e.ws):
                for ch in range(c):
                    a = np.sort(t.channel(ch)[win.slices], axis=None)
                    b = np.sort(shuffled.channel(ch)[win.slices], axis=None)
                    bad_multiset += not np.array_equal(a, b)
        bad_inverse += invert_image(shuffled, plan) != t
    report(4, bad_multiset == 0 and bad_inverse == 0,
           f"fixtures=50 multiset_violations={bad_multiset} inverse_failures={bad_inverse}")


@st.composite
def _sized_case(draw):
    w = draw(st.integers(8, 512))
    h = draw(st.integers(8, 512))
    ws_u = draw(st.integers(3, 64))
    ws0 = initial_ws(max(w, h), ws_u)
    ws_l = draw(st.integers(2, ws0))
    return w, h, ws_l, ws_u, draw(st.integers(0, 2**63 - 1))


def test_criterion_05_plan_bounds_and_termination():
    stats_seen = {"cases": 0}
    failures = []

    @settings(max_examples=80, deadline=None, derandomize=True, database=None)
    @given(_sized_case())
    def check(case):
        w, h, ws_l, ws_u, seed = case
        gen = np.random.Generator(np.random.Philox(seed))
        t = ImageTensor(gen.integers(0, 256, size=(1, h, w), dtype=np.uint8))
        plan = plan_image(t, (ws_l, ws_u), MixKey(seed))
        stats_seen["cases"] += 1
        # a split always yields >= 2 children, so iterations <= 2 * leaves <= 2 * pixels
        budget = 2 * w * h
        cover = np.zeros((h, w), dtype=np.int32)
        lo = 1 << (ws_l.bit_length() - 1)
        for e in plan.entries:
            cover[e.region.slices] += 1
            interior = e.region.size >= lo
            if interior and not lo <= e.ws <= plan.initial_ws:
                failures.append((case, e))
            if not interior and e.ws != e.region.size:
                failures.append((case, e))
        if plan.iterations > budget or not (cover == 1).all():
            failures.append((case, "budget/tiling"))
        assert not failures, failures[:3]

    try:
        check()
        ok = True
    except AssertionError:
        ok = False
    report(5, ok and not failures, f"cases={stats_seen['cases']} violations={len(failures)}")


def test_criterion_06_initial_ws_trace():
    a, b = initial_ws(16, 6), initial_ws(224, 8)
    report(6, a == 4 and b == 8, f"(16,6)->{a} (224,8)->{b}")


def test_criterion_07_upper_bound_formula():
    alpha0 = estimate_alpha0(4.0)
    _, ws_a = upper_bound_ws(alpha0, alpha0)
    _, ws_b = upper_bound_ws(alpha0**4, alpha0)
    report(7, ws_a == 5 and ws_b == 7, f"alpha0={alpha0!r} alpha=alpha0->{ws_a} alpha=alpha0^4->{ws_b}")


def test_criterion_08_st_adam_arithmetic():
    start = time.perf_counter()
    p = StAdamParams(eta=1.0, beta=0.9, gamma=0.999, epsilon=1e-8)
    w1, _ = st_adam_step(np.zeros(1), np.ones(1), OptimizerState.zeros(1), p)
    mp.mp.dps = 40
    exact = float(mp.mpf("0.1") / (mp.sqrt(mp.mpf("0.001")) + mp.mpf("1e-8")))
    step_err = abs(abs(w1[0]) - exact)

    gen = np.random.Generator(np.random.Philox(8))
    q = StAdamParams(eta=0.01, beta=0.0, gamma=0.0)
    wa = wb = gen.standard_normal(4)
    sa = sb = OptimizerState.zeros(4)
    worst = 0.0
    for _ in range(500):
        g = gen.standard_normal(4)
        wa, sa = st_adam_step(wa, g, sa, q)
        wb, sb = adam_step(wb, g, sb, q)
        worst = max(worst, float(np.max(np.abs(wa - wb))))

    traj = optimize(quadratic, quadratic_grad, (5.0, 5.0), StAdamParams(eta=0.01), max_iters=5000, tol=0.0)
    hit = next((i for i, f in enumerate(traj.losses) if math.sqrt(2 * f) < 1e-3), None)
    elapsed = time.perf_counter() - start
    ok = step_err <= 1e-9 and worst <= 1e-12 and hit is not None and hit <= 5000 and elapsed < 10
    report(8, ok, f"step_err={step_err:.2e} adam_gap={worst:.2e} steps_to_1e-3={hit} "
                  f"final_norm={np.linalg.norm(traj.w):.2e} runtime={elapsed:.2f}s")


def test_criterion_09_search_space_cliff():
    plan = ShufflePlan(6, 6, 1, 2, 6, 6, 2, 0.0, entries=[PlanEntry(Region(0, 0, 6, 6), 6, (0,))])
    est = search_space(plan)
    exact = math.log2(math.factorial(36))
    ok = 138.0 < est.log2_sum < 138.2 and est.exceeds_threshold and est.log2_sum == exact
    report(9, ok, f"log2(36!)={est.log2_sum!r} flagged={est.exceeds_threshold}")


def test_criterion_10_attack_monotonicity():
    start = time.perf_counter()
    rows = attack_sweep(corpus_dir("attack"), (2, 3), seed=0)
    elapsed = time.perf_counter() - start
    by_ws = {r.ws: r for r in rows}
    ok = (len(rows) == 2 and by_ws[2].images == 20
          and by_ws[3].mean_recovery <= by_ws[2].mean_recovery
          and by_ws[2].mean_recovery > by_ws[2].mean_baseline
          and elapsed < 300)
    report(10, ok, f"images={by_ws[2].images} ws2={by_ws[2].mean_recovery:.4f} "
                   f"(random {by_ws[2].mean_baseline:.4f}) ws3={by_ws[3].mean_recovery:.4f} "
                   f"runtime={elapsed:.1f}s")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)

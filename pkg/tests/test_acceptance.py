"""Acceptance gate.

Each test checks one headline criterion at its stated tolerance and records a
PASS/FAIL line; the lines are printed in the terminal summary (see conftest)
and also when this file is run directly with ``python3 tests/test_acceptance.py``.
Budget: a few minutes on one core.
"""

from __future__ import annotations

import itertools
import statistics
import time

import numpy as np
import pytest

from binpack.baselines import shelf_next_fit
from binpack.datagen import (InstanceRecord, RANDOM, dumps, generate_full_set,
                             generate_random_instance, is_exact_tiling, loads, replay_tiling)
from binpack.env import SCENARIOS, ScenarioConfig, WorldState, balance_zones
from binpack.grid import (GridBin, ItemSpec, Orientation, Placement, apply_pack, apply_unpack,
                          fits, is_full, utilization)
from binpack.harness import play_episode, run_suite
from binpack.policy import greedy_place
from binpack.search import _DEFAULT_POLICY, SearchConfig, _evaluate_all, _search_root

from oracles import argmax_anchor, best_packed_area

pytestmark = pytest.mark.slow

RESULTS: list[str] = []


def record(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _full_pack(W: int, n: int, need: float) -> None:
    cfg = SearchConfig(require_full_pack=True, use_repack=True, repack_budget=30)
    t0 = time.perf_counter()
    full = sum(play_episode(generate_full_set(W, W, 2.0, s), "S-R5A3", cfg).report.utilization == 1.0
               for s in range(n))
    dt = time.perf_counter() - t0
    record(f"full-pack {W}x{W}", full / n >= need,
           f"{full}/{n} reach 1.0 (need >= {need:.0%}) in {dt:.0f}s")


def test_full_pack_4x4():
    _full_pack(4, 200, 1.0)


def test_full_pack_5x5():
    _full_pack(5, 200, 0.95)


ALL_VISIBLE = ScenarioConfig("ALL-VISIBLE", 1, 4, 4)
ITEM_TYPES = [(w, h) for w in range(1, 4) for h in range(1, 4)]


def test_oracle_optimality():
    """Every bin up to 4x4 with every multiset of 1-4 items of side <= 3.

    Pass criterion: the best utilization the search evaluates equals the
    brute-force optimum.  Executed episodes rank by packed-item count first and
    may settle below that optimum; those are reported as a diagnostic.
    """
    cfg = SearchConfig(rotation=True, use_repack=True, repack_budget=60)
    t0 = time.perf_counter()
    n = search_dev = exec_dev = 0
    for W, H in itertools.product(range(1, 5), repeat=2):
        for k in range(1, 5):
            for ms in itertools.combinations_with_replacement(ITEM_TYPES, k):
                n += 1
                opt = best_packed_area(W, H, ms)
                rec = InstanceRecord(W, H, tuple(ms), RANDOM)
                world = WorldState.new(ALL_VISIBLE, W, H, rec.item_specs())
                X, ctx = _search_root(world, cfg, _DEFAULT_POLICY, False)
                found = max((e.util for e in _evaluate_all(X, world, cfg, ctx)), default=0)
                search_dev += found * W * H != opt
                exec_dev += play_episode(rec, ALL_VISIBLE, cfg).bin.occupied != opt
    dt = time.perf_counter() - t0
    record("oracle optimality", search_dev == 0,
           f"{n} instances, {search_dev} search deviations; executed-episode deviations "
           f"{exec_dev} (diagnostic) in {dt:.0f}s")


def test_greedy_equivalence():
    rng = np.random.default_rng(2024)
    n, bad = 100_000, 0
    for k in range(n):
        W, H = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        b = GridBin.empty(W, H)
        if k % 2:
            # arbitrary occupancy from unit cells
            cells = np.flatnonzero(rng.random(W * H) < rng.random())
            for i, c in enumerate(cells):
                b = apply_pack(b, Placement(ItemSpec(i, 1, 1), Orientation.DEG0, c % W, c // W))
        else:
            for i in range(int(rng.integers(0, 5))):
                w, h = int(rng.integers(1, W + 1)), int(rng.integers(1, H + 1))
                x, y = int(rng.integers(0, W - w + 1)), int(rng.integers(0, H - h + 1))
                if fits(b, x, y, (w, h)):
                    b = apply_pack(b, Placement(ItemSpec(i, w, h), Orientation.DEG0, x, y))
        size = (int(rng.integers(1, W + 1)), int(rng.integers(1, H + 1)))
        d = greedy_place(b, size)
        bad += (d.action, d.score) != argmax_anchor(b.occ[1:-1, 1:-1].tolist(), *size)
    record("greedy equivalence", bad == 0, f"{bad} mismatches over {n} states")


def test_conveyor_balance():
    checked = bad = 0
    for cfg in (c for c in SCENARIOS.values() if c.n_robot == 2):
        for k_total in range(1, cfg.n_max):
            for k_alpha_t in range(0, min(k_total, cfg.n_A - cfg.n_O) + 1):
                checked += 1
                k_o = min(k_total - k_alpha_t, cfg.n_O)
                k_a = max(k_alpha_t, k_total // 2 + 1 - k_o)
                want = (k_o, k_a, k_total - k_a - k_o)
                got = balance_zones(k_total, k_alpha_t, cfg)
                bad += got != want or sum(got) != k_total or not 0 <= got[0] <= cfg.n_O
    record("conveyor balance", bad == 0, f"{bad} mismatches over {checked} (scenario, k) pairs")


def test_rotation_trend():
    insts = [generate_random_instance(10, 10, 40, s) for s in range(500)]
    means = {rot: run_suite(insts, ["S-R1A1"], SearchConfig(rotation=rot)).mean_utilization()
             for rot in (True, False)}
    gap = 100 * (means[True] - means[False])
    record("rotation trend", gap >= 2.0,
           f"{100 * means[True]:.2f}% with vs {100 * means[False]:.2f}% without, "
           f"gap {gap:.2f} points (need >= 2)")


def test_dual_step_reduction():
    insts = [generate_random_instance(10, 10, 40, s) for s in range(200)]
    rep = run_suite(insts, ["S-R5A1", "D-R5A2O2"], SearchConfig(beam_width=2))
    agg = rep.aggregates()
    d, s = agg["D-R5A2O2"], agg["S-R5A1"]
    ratio = d["total_packing_steps"] / d["total_packed_items"]
    single_ok = s["total_packing_steps"] == s["total_packed_items"]
    record("dual step reduction", ratio <= 0.65 and single_ok,
           f"dual ratio {ratio:.3f} (need <= 0.65); single {s['total_packing_steps']} steps "
           f"for {s['total_packed_items']} items")


def test_baseline_dominance():
    insts = [generate_random_instance(5, 5, 25, s) for s in range(1000)]
    engine = run_suite(insts, ["S-R1A1"], SearchConfig(rotation=False)).mean_utilization()
    shelf = statistics.fmean(float(utilization(shelf_next_fit(i))) for i in insts)
    gap = 100 * (engine - shelf)
    record("baseline dominance", gap >= 5.0,
           f"engine {100 * engine:.2f}% vs shelf next-fit {100 * shelf:.2f}%, "
           f"gap {gap:.2f} points (need >= 5)")


def test_datagen_validity():
    t0 = time.perf_counter()
    n, bad = 10_000, 0
    for s in range(n):
        rec = generate_full_set(10, 10, 2.0, s)
        ok = (sum(w * h for w, h in rec.items) == 100 and is_full(replay_tiling(rec))
              and is_exact_tiling(rec) and generate_full_set(10, 10, 2.0, s) == rec)
        bad += not ok
    dt = time.perf_counter() - t0
    record("datagen validity", bad == 0 and dt < 120,
           f"{bad} invalid of {n} in {dt:.0f}s (limit 120s)")


def test_roundtrip_and_determinism():
    rng = np.random.default_rng(7)
    inv_bad = 0
    for k in range(2000):
        W, H = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        b = GridBin.empty(W, H)
        for i in range(int(rng.integers(0, 5))):
            w, h = int(rng.integers(1, W + 1)), int(rng.integers(1, H + 1))
            x, y = int(rng.integers(0, W - w + 1)), int(rng.integers(0, H - h + 1))
            if fits(b, x, y, (w, h)):
                b = apply_pack(b, Placement(ItemSpec(i, w, h), Orientation.DEG0, x, y))
        w, h = int(rng.integers(1, W + 1)), int(rng.integers(1, H + 1))
        x, y = int(rng.integers(0, W - w + 1)), int(rng.integers(0, H - h + 1))
        if fits(b, x, y, (w, h)):
            p = Placement(ItemSpec(99, w, h), Orientation.DEG0, x, y)
            inv_bad += apply_unpack(apply_pack(b, p), p) != b

    recs = [generate_full_set(6, 5, 2.0, s) if s % 2 else generate_random_instance(8, 8, 20, s)
            for s in range(1000)]
    text = dumps(recs)
    ser_ok = loads(text) == recs and dumps(loads(text)) == text

    insts = [generate_full_set(4, 4, 2.0, s) for s in range(12)]
    cfg = SearchConfig(require_full_pack=True, use_repack=True, repack_budget=60)
    one = run_suite(insts, ["S-R5A3", "D-R5A2O2"], cfg, workers=1)
    two = run_suite(insts, ["S-R5A3", "D-R5A2O2"], cfg, workers=2)
    strip = lambda eps: [e.__class__(**{**e.__dict__, "repack_time_ms": 0.0}) for e in eps]
    det_ok = strip(one.episodes) == strip(two.episodes)
    record("round-trip and determinism", inv_bad == 0 and ser_ok and det_ok,
           f"inversion mismatches {inv_bad}, serialization {'exact' if ser_ok else 'DIFFERS'}, "
           f"1 vs 2 workers {'identical' if det_ok else 'DIFFER'}")


if __name__ == "__main__":
    import sys
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
    sys.exit(0 if all(r.startswith("[PASS]") for r in RESULTS) else 1)

"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Criteria 4 to 7 share one 60-design suite (about 50k directed pairs) built once per module.
Run with ``pytest tests/test_acceptance.py -v`` to see the summary lines.
"""

import math
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from conftest import random_design

from xtalkpred.bench_gen import GenConfig, generate_suite
from xtalkpred.features import Dataset, extract_features, normalize, pair_samples, split
from xtalkpred.labeling import label_design, pair_labels
from xtalkpred.layout import default_w_max, extract_coupling_pairs, extract_coupling_pairs_brute
from xtalkpred.model import evaluate, evaluate_onestep, r2_score, train_nosi, train_onestep_baseline, train_two_step
from xtalkpred.oracle import (VDD, RampStimulus, build_network, crossing_time, default_dt, delta_delay,
                              lumped_rc, simulate_transient, sweep_skew)
from xtalkpred.sta import build_report
from xtalkpred.tech import two_net_config
from xtalkpred.timing import TSI, classify_pairs_by_window

TESTS = Path(__file__).parent


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, runtime, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({runtime:.1f} s)")
    return emit


def test_criterion_1_lumped_rc(verdict):
    t0 = time.perf_counter()
    net = lumped_rc(1.0, 100.0, RampStimulus(0.0, 0.0, "rise"))  # ideal step at t = 0
    w = simulate_transient(net)
    t50 = crossing_time(w.t, w.column(0), 0.5 * VDD)
    err = abs(t50 - math.log(2) * 100.0) / (math.log(2) * 100.0)
    rt = time.perf_counter() - t0
    ok = err < 0.01 and rt < 1.0
    verdict(1, ok, rt, f"t50 {t50:.3f} ps, error {100 * err:.3f}%")
    assert ok


def _two_net_delays(skews=(0.0, 15.0, -15.0), **kw):
    out = []
    for direction in ("opposite", "same"):
        cfg = two_net_config(direction=direction, segments_per_wire=kw.get("spw", 8))
        d = cfg.design
        for s in skews:
            r = delta_delay(d.nets[1], [d.nets[2]], cfg.pairs, d, [s], [direction], cfg.segments_per_wire,
                            dt=kw.get("dt"))
            out += [r.d_noSI, r.d_SI]
    return np.array(out)


def test_criterion_2_discretization(verdict):
    t0 = time.perf_counter()
    base = _two_net_delays()
    finer = _two_net_delays(spw=16)
    cfg = two_net_config()
    dt = default_dt(build_network(cfg.design.nets[1], [cfg.design.nets[2]], cfg.pairs, cfg.design))
    half = _two_net_delays(dt=dt / 2)
    d_spw = np.max(np.abs(finer - base) / base)
    d_dt = np.max(np.abs(half - base) / base)
    rt = time.perf_counter() - t0
    ok = d_spw < 0.01 and d_dt < 0.002 and rt < 10.0
    verdict(2, ok, rt, f"segments 8->16 max change {100 * d_spw:.3f}%, dt/2 max change {100 * d_dt:.4f}%")
    assert ok


def test_criterion_3_skew_sensitivity(verdict):
    t0 = time.perf_counter()
    opp = sweep_skew(two_net_config(direction="opposite"), 0.0, 200.0, 5.0)
    same = sweep_skew(two_net_config(direction="same"), 0.0, 200.0, 5.0)
    rt = time.perf_counter() - t0
    skew = np.array([r[0] for r in opp])
    delta = np.array([r[3] for r in opp])
    mag = np.abs(delta)
    peak = int(np.argmax(mag))
    s_in = two_net_config().design.drivers[1].s_in
    a = delta[peak] > 0 and abs(skew[peak]) <= s_in
    b = [r[3] for r in same if r[0] == 0.0][0] < 0
    c = max(mag[0], mag[-1]) <= 0.10 * mag[peak]
    span = mag[peak] - min(mag[0], mag[-1])
    jump = float(np.max(np.abs(mag[3:] - mag[:-3])))  # 15 ps = three grid steps
    e = jump >= 0.5 * span
    ok = a and b and c and e and rt < 60.0
    verdict(3, ok, rt, f"peak {delta[peak]:.3f} ps at dskew {skew[peak]:.0f}, tails "
            f"{max(mag[0], mag[-1]) / mag[peak]:.3f} of peak, best 15 ps step {jump / span:.2f} of span, "
            f"same-direction delta at 0: {[r[3] for r in same if r[0] == 0.0][0]:.3f} ps")
    assert ok


# ---------------------------------------------------------------------------
# shared suite for criteria 4 to 7

@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    designs, _ = generate_suite(GenConfig(), 60, seed=2024)
    out = []
    for d in designs:
        wm = default_w_max(d)
        pairs = extract_coupling_pairs(d, wm)
        out.append((d, wm, pairs, label_design(d, pairs)))
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def trained(suite):
    data, _ = suite
    seg, prs = [], []
    for d, wm, pairs, res in data:
        seg += extract_features(d, pairs, wm, oracle=res)
        prs += pair_samples(d, pairs, wm, oracle=res)
    ds = normalize(split(Dataset(seg), 0.7, seed=0, by_design=True))
    t0 = time.perf_counter()
    model, metrics = train_two_step(ds)
    train_s = time.perf_counter() - t0
    one, _ = train_onestep_baseline(ds)
    test_names = {s.design for s in ds.test().samples}
    return {"ds": ds, "pairs": prs, "model": model, "metrics": metrics, "one": one,
            "test_names": test_names, "train_s": train_s}


def test_criterion_4_classification(suite, trained, verdict):
    data, label_s = suite
    agree = total = 0
    for d, wm, pairs, res in data:
        window = classify_pairs_by_window(d, pairs)
        for lab in pair_labels(d, pairs, res):
            key = (lab.pair.victim_segment_id, lab.pair.aggressor_segment_id)
            agree += window[key] == lab.classification
            total += 1
    held = Dataset([s for s in trained["pairs"] if s.design in trained["test_names"]])
    tsi, _, _ = trained["model"].predict_segments(held.X())
    truth = np.array([s.label_class == TSI for s in held.samples])
    pair_acc = float(np.mean(tsi == truth))
    seg_acc = trained["metrics"]["classifier"].accuracy
    rt = label_s + trained["train_s"]
    ok = total >= 50_000 and agree / total >= 0.99 and seg_acc >= 0.99 and pair_acc >= 0.99 and rt < 300
    verdict(4, ok, rt, f"{total} labeled pairs, window agreement {agree / total:.4f}, classifier accuracy "
            f"{seg_acc:.4f} (segments) / {pair_acc:.4f} ({len(held)} held-out pairs)")
    assert ok


def _uniform_nosi_r2():
    cfg = GenConfig(n_layers=1, n_nets=200, cells=("INVX2",), sink_min=1.9, sink_max=2.1, bend_prob=0.0)
    designs, _ = generate_suite(cfg, 6, seed=5)
    samples = []
    for d in designs:
        wm = default_w_max(d)
        pairs = extract_coupling_pairs(d, wm)
        samples += extract_features(d, pairs, wm, oracle=label_design(d, pairs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # one cell and one layer make several columns constant
        ds = normalize(split(Dataset(samples), 0.7, seed=0))
    return train_nosi(ds)[1].r2


def test_criterion_5_regression(trained, verdict):
    t0 = time.perf_counter()
    m = trained["metrics"]
    uniform = _uniform_nosi_r2()
    rt = time.perf_counter() - t0 + trained["train_s"]
    ok = m["regressor"].r2 >= 0.95 and uniform >= 0.97
    verdict(5, ok, rt, f"tau_SI R2 {m['regressor'].r2:.4f}, tau_noSI R2 {uniform:.4f} on uniform-driver designs "
            f"(info: {m['nosi'].r2:.4f} on the mixed suite)")
    assert ok


def _stage_predictions(trained, data):
    model, one, ds = trained["model"], trained["one"], trained["ds"]
    golden, two, base, tsi_net, ratios = [], [], [], [], []
    for d, wm, pairs, res in data:
        if d.name not in trained["test_names"]:
            continue
        r = build_report(d, model, pairs, wm, oracle=res)
        ratios += [g["ratio"] for g in r.golden.values()]
        segs = extract_features(d, pairs, wm)
        po = one.predict((np.array([s.features.as_tuple() for s in segs]) - ds.mean) / ds.scale)
        by_net = {}
        for s, v in zip(segs, po):
            by_net[s.net_id] = by_net.get(s.net_id, 0.0) + v
        victims = {row["victim_net"] for row in r.aggressors if row["oracle_classification"] == TSI}
        for nid in sorted(d.nets):
            st = r.stages[nid]
            golden.append(res.nets[nid].d_stage_si)
            two.append(st.d_stage)
            base.append(st.d_driver + by_net[nid])
            tsi_net.append(nid in victims)
    return tuple(map(np.array, (golden, two, base, tsi_net, ratios)))


@pytest.fixture(scope="module")
def stages(suite, trained):
    t0 = time.perf_counter()
    out = _stage_predictions(trained, suite[0])
    return out, time.perf_counter() - t0


def test_criterion_6_two_step_beats_one_step(trained, stages, verdict):
    (g, two, one, tsi, _), rt = stages
    r_two, r_one = r2_score(g, two), r2_score(g, one)
    t_two, t_one = r2_score(g[tsi], two[tsi]), r2_score(g[tsi], one[tsi])
    ok = r_two >= r_one and t_two - t_one >= 0.01
    ds = trained["ds"]
    sub = ds.test().where([s.label_class == TSI for s in ds.test().samples])
    s_two = evaluate(trained["model"], sub).r2
    s_one = evaluate_onestep(trained["one"], ds.mean, ds.scale, sub).r2
    verdict(6, ok, rt, f"stage delay R2 two-step {r_two:.4f} vs one-step {r_one:.4f}; nets with TSI aggressors "
            f"({int(tsi.sum())}) {t_two:.4f} vs {t_one:.4f} (info: TSI segment samples {s_two:.4f} vs {s_one:.4f})")
    assert ok


def test_criterion_7_accuracy_ratio(stages, verdict):
    (*_, ratios), rt = stages
    mean = float(np.nanmean(ratios))
    ok = 0.97 <= mean <= 1.03
    verdict(7, ok, rt, f"mean predicted/golden stage delay {mean:.4f} over {len(ratios)} held-out stages")
    assert ok


INVARIANTS = [
    "test_sta.py::test_net_delay_is_left_to_right_sum",
    "test_sta.py::test_stage_and_path_identities",
    "test_sta.py::test_breakdown_sums_only_tsi",
    "test_sta.py::test_dropping_fsi_pair_changes_no_delay",
    "test_model.py::test_fsi_pairs_add_nothing",
    "test_timing.py::test_delta_skew_antisymmetric",
    "test_timing.py::test_time_shift_changes_nothing",
    "test_layout.py::test_translation_leaves_pairs_unchanged",
    "test_features.py::test_features_translation_invariant",
    "test_bench_gen.py::test_same_seed_byte_identical",
    "test_model.py::test_training_is_deterministic",
    "test_model.py::test_save_load_bit_identical",
    "test_model.py::test_model_loads_in_another_process",
]


def test_criterion_8_invariants(verdict):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(TESTS / t) for t in INVARIANTS]],
                          capture_output=True, text=True, cwd=TESTS.parent)
    rt = time.perf_counter() - t0
    ok = proc.returncode == 0 and rt < 60.0
    verdict(8, ok, rt, proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:])
    assert ok, proc.stdout[-2000:]


def test_criterion_9_sweep_equals_brute(verdict):
    rng = np.random.default_rng(9)
    designs = [random_design(rng, int(rng.integers(2, 201))) for _ in range(100)]
    t0 = time.perf_counter()
    same = sum(extract_coupling_pairs(d, 0.3) == extract_coupling_pairs_brute(d, 0.3) for d in designs)
    rt = time.perf_counter() - t0
    ok = same == 100 and rt < 30.0
    verdict(9, ok, rt, f"{same}/100 designs identical, {sum(len(d.segments) for d in designs)} segments total")
    assert ok

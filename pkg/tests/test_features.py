import warnings
from dataclasses import replace

import numpy as np
import pytest
from conftest import line_design
from hypothesis import given, settings
from hypothesis import strategies as st

from xtalkpred.bench_gen import GenConfig, generate
from xtalkpred.features import (CSV_HEADER, DSKEW_MAX, FEATURES, NONE, NOSI_FEATURES, W_MAX_FACTOR, Dataset,
                                FeatureError, FeatureVector, Sample, denormalize, extract_features,
                                load_dataset, normalize, save_dataset, split)
from xtalkpred.layout import CouplingPair, default_w_max, extract_coupling_pairs, translate_design
from xtalkpred.timing import FSI, TSI, TimingWindow


def _fv(**kw):
    base = dict(dskew=0.0, rf=1, s_in=20.0, s_out=30.0, d_driver=25.0, m_w=0.05, m_t=0.1, m_h=0.1,
                m_eps0=3.0, wire_len=100.0, l_si=10.0, w_si=0.1)
    base.update(kw)
    return FeatureVector(**base)


def _samples(n, n_tsi, seed=0):
    rng = np.random.default_rng(seed)
    return [Sample(_fv(dskew=float(rng.normal()), wire_len=float(rng.uniform(10, 100))),
                   TSI if i < n_tsi else FSI, 1.0 if i < n_tsi else 0.0, 5.0, "d", i, i + 1)
            for i in range(n)]


def test_table_symbols_appear_once():
    assert len(set(FEATURES)) == len(FEATURES) == 12
    assert set(NOSI_FEATURES) < set(FEATURES)
    assert CSV_HEADER == FEATURES + ("label_class", "label_delta", "label_tau_nosi")


def test_coupled_pass_through_and_uncoupled_sentinels():
    d = line_design([(1, (0, 0), (50, 0)), (1, (20, 0.15), (35, 0.15)), (1, (0, 9), (40, 9))], n_layers=1)
    pairs = extract_coupling_pairs(d, 0.15)
    assert pairs == [CouplingPair(1, 2, 15.0, pytest.approx(0.1))]
    windows = {1: TimingWindow(110, 140), 2: TimingWindow(100, 130), 3: TimingWindow(100, 120)}
    by_seg = {s.segment_id: s for s in extract_features(d, pairs, 0.15, windows)}
    f = by_seg[1].features
    assert (f.l_si, f.w_si, f.dskew) == (15.0, pytest.approx(0.1), 10.0)
    assert by_seg[2].features.dskew == -10.0
    u = by_seg[3].features
    assert (u.l_si, u.w_si, u.dskew) == (0.0, W_MAX_FACTOR * 0.15, DSKEW_MAX)
    assert by_seg[3].label_class == NONE
    assert (f.d_driver, f.s_out, f.wire_len) == (110 - d.drivers[1].at_in, 30, 50.0)


def test_missing_layer_rejected():
    d = line_design([(1, (0, 0), (50, 0))], n_layers=1)
    d.segments[1] = replace(d.segments[1], layer_id=7)
    with pytest.raises(FeatureError, match="missing layer 7"):
        extract_features(d, [], 0.15, {1: TimingWindow(0, 1)})


def _gen(seed=5, n=60):
    d = generate(GenConfig(seed=seed, n_nets=n))
    wm = default_w_max(d)
    return d, wm, extract_coupling_pairs(d, wm)


def test_extraction_deterministic(tmp_path):
    d, wm, pairs = _gen()
    a, b = extract_features(d, pairs, wm), extract_features(d, pairs, wm)
    assert a == b
    save_dataset(Dataset(a), tmp_path / "a.csv")
    save_dataset(Dataset(b), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert all(s.features.wire_len > 0 for s in a)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 5000), st.sampled_from([(250.0, -40.0), (-1000.0, 3.5), (0.0, 77.0)]))
def test_features_translation_invariant(seed, shift):
    d, wm, pairs = _gen(seed, 30)
    t = translate_design(d, *shift)
    a = extract_features(t, extract_coupling_pairs(t, wm), wm)
    b = extract_features(d, pairs, wm)
    assert [(s.key, s.aggressor_segment_id) for s in a] == [(s.key, s.aggressor_segment_id) for s in b]
    # moved coordinates round at the last bit
    assert np.allclose([s.features.as_tuple() for s in a], [s.features.as_tuple() for s in b],
                       rtol=1e-12, atol=1e-9)


def test_normalize_round_trip_and_constant_column():
    ds = split(Dataset(_samples(200, 40)), 0.7, seed=1)
    with pytest.warns(UserWarning, match="zero-variance"):
        n = normalize(ds)
    X = ds.X()
    Xn = n.X(normalized=True)
    const = [FEATURES.index(c) for c in ("s_in", "m_w", "l_si")]
    assert np.all(Xn[:, const] == 0.0)
    assert np.allclose(denormalize(Xn, n.mean, n.scale), X, rtol=1e-9, atol=0)


def test_train_stats_ignore_test_split():
    ds = split(Dataset(_samples(300, 60)), 0.7, seed=2)
    test_idx = [i for i, a in enumerate(ds.assignment) if a == "test"]
    other = list(ds.samples)
    for i in test_idx:
        other[i] = replace(other[i], features=_fv(dskew=1e3, wire_len=1e4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = normalize(ds)
        b = normalize(replace(ds, samples=other))
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.scale, b.scale)


def test_split_sizes_stratified_and_repeatable():
    ds = Dataset(_samples(1000, 150))
    a, b = split(ds, 0.7, seed=42), split(ds, 0.7, seed=42)
    assert a.assignment == b.assignment
    tr, te = a.train(), a.test()
    assert (len(tr), len(te)) == (700, 300)
    frac = [np.mean([s.label_class == TSI for s in part.samples]) for part in (tr, te)]
    assert abs(frac[0] - frac[1]) < 0.01
    assert split(ds, 0.7, seed=43).assignment != a.assignment
    with pytest.raises(FeatureError):
        split(ds, 1.0)


def test_small_split_rounds_per_class():
    a = split(Dataset(_samples(10, 2)), 0.7, seed=0)
    tr, te = a.train(), a.test()
    assert len(tr) + len(te) == 10
    assert sum(s.label_class == TSI for s in tr.samples) == round(0.7 * 2)
    assert sum(s.label_class == FSI for s in tr.samples) == round(0.7 * 8)


def test_single_tsi_falls_back_with_warning():
    with pytest.warns(UserWarning, match="stratify"):
        split(Dataset(_samples(10, 1)), 0.7)


def test_split_by_design_keeps_designs_whole():
    samples = [replace(s, design=f"d{i % 5}") for i, s in enumerate(_samples(100, 20))]
    a = split(Dataset(samples), 0.7, seed=3, by_design=True)
    for name in {s.design for s in samples}:
        parts = {p for s, p in zip(a.samples, a.assignment) if s.design == name}
        assert len(parts) == 1


def test_dataset_file_round_trip(tmp_path):
    d, wm, pairs = _gen()
    ds = split(Dataset(extract_features(d, pairs, wm)), 0.7, seed=0)
    p = tmp_path / "ds.csv"
    save_dataset(ds, p)
    assert p.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    again = load_dataset(p)
    assert again.samples == ds.samples and again.assignment == ds.assignment
    p.write_text("a,b\n")
    with pytest.raises(FeatureError, match="header"):
        load_dataset(p)

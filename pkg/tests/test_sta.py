import json
import math

import pytest
from conftest import line_design
from hypothesis import given
from hypothesis import strategies as st

from xtalkpred.layout import Design
from xtalkpred.sta import (StaError, StageDelay, build_report, compute_ddr, net_delay, path_delay,
                           stage_delay)
from xtalkpred.timing import FSI, TSI, net_windows

ps = st.floats(-1e3, 1e3, allow_nan=False)


def test_net_delay_examples():
    assert net_delay([10, 12, 8, 11], {2: 4}) == 45
    assert net_delay([10, 12, 8, 11]) == 41
    assert net_delay([10, 12, 8, 11], [0, 0, 4, 0]) == 45
    with pytest.raises(StaError):
        net_delay([10, 12], [1.0])
    with pytest.raises(StaError, match="outside"):
        net_delay([10, 12], {5: 1.0})


@given(st.lists(ps, max_size=12), st.data())
def test_net_delay_is_left_to_right_sum(taus, data):
    deltas = data.draw(st.dictionaries(st.integers(0, max(0, len(taus) - 1)), ps)) if taus else {}
    expect = 0.0
    for i, t in enumerate(taus):
        expect += t
        if i in deltas:
            expect += deltas[i]
    assert net_delay(taus, deltas) == expect


def test_stage_and_path_examples():
    s = stage_delay(1, 20.0, [10, 12, 8, 11], {2: 4.0}, [11, 12, 13, 14])
    assert (s.d_net, s.delta_total, s.d_stage) == (45.0, 4.0, 65.0)
    assert [r["delta"] for r in s.segments] == [0.0, 0.0, 4.0, 0.0]
    hundred = StageDelay(1, 30.0, 70.0, 0.0, 100.0)
    assert path_delay([hundred] * 3).d_path == 300.0
    assert path_delay([hundred]).d_path == 100.0
    with pytest.raises(StaError):
        path_delay([])


@given(st.lists(st.tuples(ps, st.lists(ps, max_size=5)), min_size=1, max_size=10))
def test_stage_and_path_identities(spec):
    stages = [stage_delay(i, drv, taus) for i, (drv, taus) in enumerate(spec)]
    for s in stages:
        assert s.d_stage == s.d_driver + s.d_net
    p = path_delay(stages)
    brute = 0.0
    for s in stages:
        brute += s.d_stage
    assert p.d_path == brute and p.audit[-1] == p.d_path


def test_ddr():
    assert compute_ddr(28.15, 100.0) == pytest.approx(0.2815)
    assert compute_ddr(0.0, 50.0) == 0.0
    assert compute_ddr(-3.0, 60.0) == -0.05
    with pytest.raises(StaError):
        compute_ddr(1.0, 0.0)


def test_report_without_pairs(small_model):
    d = line_design([(1, (0, 0), (80, 0)), (1, (0, 5), (60, 5))], n_layers=1)
    r = build_report(d, small_model, pairs=[], w_max=0.15)
    assert (r.totals["tsi"], r.totals["fsi"]) == (0, 0)
    assert all(s.delta_total == 0 for s in r.stages.values())
    assert "TSI 0  FSI 0" in r.table()


class _Forced:
    """Wraps a model; aggressor ids in ``tsi`` are TSI with delta = aggressor id, the rest FSI."""

    def __init__(self, model, design, tsi):
        self.model, self.design, self.tsi = model, design, tsi

    def predict_tau_nosi(self, X):
        return self.model.predict_tau_nosi(X)

    def predict_segments(self, X):
        import numpy as np
        from xtalkpred.features import FEATURES
        # l_si doubles as the aggressor tag below
        tag = np.asarray(X)[:, FEATURES.index("l_si")]
        hit = np.isin(tag, list(self.tsi))
        return hit, np.where(hit, tag, 0.0), self.predict_tau_nosi(X)


def test_breakdown_sums_only_tsi(small_model):
    # victim 1 on a track, five aggressors along it with distinct overlaps 1..5 um
    specs = [(1, (0, 0), (100, 0))]
    for k in range(5):
        y = 0.12 if k % 2 == 0 else -0.12
        x0 = 20.0 * k
        specs.append((1, (x0, y), (x0 + (k + 1), y)))
    d = line_design(specs, n_layers=1)
    r = build_report(d, _Forced(small_model, d, {2.0, 4.0}), w_max=0.15)
    rows = [row for row in r.aggressors if row["victim_net"] == 1]
    assert sorted(row["classification"] for row in rows) == [FSI, FSI, FSI, TSI, TSI]
    assert r.stages[1].delta_total == sum(row["delta"] for row in rows if row["classification"] == TSI) == 6.0


def test_report_properties(small_suite, small_model, tmp_path):
    d, wm, pairs, res = small_suite[0]
    r = build_report(d, small_model, pairs, wm, oracle=res, paths=[sorted(d.nets)[:3]])
    for s in r.stages.values():
        assert s.d_stage == s.d_driver + s.d_net
    assert r.paths[0].d_path == sum(r.stages[n].d_stage for n in sorted(d.nets)[:3])
    assert r.totals["tsi"] + r.totals["fsi"] == len(r.aggressors) == 2 * len(pairs)
    assert 0.9 < r.totals["accuracy_ratio"] < 1.1
    for nid, s in r.stages.items():
        tsi_sum = sum(row["delta"] for row in r.aggressors if row["victim_net"] == nid and row["classification"] == TSI)
        assert s.delta_total == pytest.approx(tsi_sum, abs=1e-12)
        assert all(row["delta"] == 0.0 for row in r.aggressors
                   if row["victim_net"] == nid and row["classification"] == FSI)
    r.save(tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert len(doc["stages"]) == len(d.nets) and "golden" in doc
    assert r.table().count("\n") >= len(d.nets) + 3


def test_report_ignores_net_order(small_suite, small_model):
    d, wm, pairs, _ = small_suite[1]
    rev = Design(d.layers, dict(reversed(list(d.nets.items()))), d.segments, d.drivers, d.meta)
    a = build_report(d, small_model, pairs, wm)
    b = build_report(rev, small_model, list(reversed(pairs)), wm)
    assert a.to_dict() == b.to_dict()


def test_dropping_fsi_pair_changes_no_delay(small_suite, small_model):
    d, wm, pairs, _ = small_suite[2]
    full = build_report(d, small_model, pairs, wm)
    fsi_both = {}
    for row in full.aggressors:
        key = tuple(sorted((row["victim_segment"], row["aggressor_segment"])))
        fsi_both.setdefault(key, []).append(row["classification"] == FSI)
    drop = next(k for k, v in sorted(fsi_both.items()) if all(v))
    kept = [p for p in pairs if (p.victim_segment_id, p.aggressor_segment_id) != drop]
    # the wire is still there, so its load stays in the windows
    less = build_report(d, small_model, kept, wm, windows=net_windows(d, pairs))
    for nid in full.stages:
        assert less.stages[nid].d_stage == full.stages[nid].d_stage
    assert not math.isnan(full.totals["worst_ddr"])

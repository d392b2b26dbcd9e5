"""Net, stage and path delay assembly plus the crosstalk report."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import pair_feature_vector, strongest_aggressors
from .layout import Design, default_w_max, extract_coupling_pairs
from .timing import DEFAULT_THRESHOLD, FSI, TSI, directed_pairs, net_windows


class StaError(ValueError):
    pass


def net_delay(taus_nosi, deltas=None) -> float:
    """Sum of quiet segment delays plus the deltas of TSI segments.

    ``deltas`` maps a segment position (0-based) to its delta, or is a
    sequence aligned with ``taus_nosi``. Summed left to right.
    """
    taus = list(taus_nosi)
    if deltas is None:
        deltas = {}
    elif not isinstance(deltas, dict):
        deltas = list(deltas)
        if len(deltas) != len(taus):
            raise StaError(f"{len(deltas)} deltas for {len(taus)} segments")
        deltas = dict(enumerate(deltas))
    bad = [k for k in deltas if not 0 <= k < len(taus)]
    if bad:
        raise StaError(f"delta position(s) {bad} outside a net of {len(taus)} segments")
    total = 0.0
    for i, tau in enumerate(taus):
        total += tau
        if i in deltas:
            total += deltas[i]
    return total


@dataclass(frozen=True)
class StageDelay:
    net_id: int
    d_driver: float
    d_net: float
    delta_total: float
    d_stage: float
    segments: tuple = ()  # ({"segment_id", "tau_nosi", "delta"}, ...)


@dataclass(frozen=True)
class PathDelay:
    stages: tuple
    d_path: float
    audit: tuple = ()  # running sum after each stage


def stage_delay(net_id, d_driver, taus_nosi, deltas=None, segment_ids=None) -> StageDelay:
    taus = list(taus_nosi)
    d = dict(enumerate(deltas)) if deltas is not None and not isinstance(deltas, dict) else dict(deltas or {})
    d_net = net_delay(taus, d)
    ids = list(segment_ids) if segment_ids is not None else list(range(len(taus)))
    rows = tuple({"segment_id": s, "tau_nosi": t, "delta": d.get(i, 0.0)} for i, (s, t) in enumerate(zip(ids, taus)))
    return StageDelay(net_id, d_driver, d_net, sum(d.values()), d_driver + d_net, rows)


def path_delay(stages) -> PathDelay:
    stages = tuple(stages)
    if not stages:
        raise StaError("empty path")
    running, audit = 0.0, []
    for s in stages:
        running += s.d_stage
        audit.append(running)
    return PathDelay(stages, running, tuple(audit))


def compute_ddr(delta_total: float, d_stage: float) -> float:
    if not d_stage > 0:
        raise StaError(f"stage delay must be positive, got {d_stage}")
    return delta_total / d_stage


# ---------------------------------------------------------------------------
# report

@dataclass
class CrosstalkReport:
    design: str
    stages: dict  # net id -> StageDelay
    aggressors: list  # per directed pair rows
    totals: dict
    golden: dict = field(default_factory=dict)  # net id -> golden columns
    paths: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"design": self.design,
                "stages": [asdict(self.stages[k]) for k in sorted(self.stages)],
                "aggressors": self.aggressors,
                "golden": [dict(self.golden[k], net_id=k) for k in sorted(self.golden)],
                "paths": [{"nets": [s.net_id for s in p.stages], "d_path": p.d_path} for p in self.paths],
                "totals": self.totals}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def table(self) -> str:
        """Fixed-width per-net table."""
        head = f"{'net':>6} {'d_driver':>9} {'d_net':>9} {'delta':>8} {'d_stage':>9} {'ddr':>8} {'tsi':>4} {'fsi':>4}"
        gold = bool(self.golden)
        if gold:
            head += f" {'golden':>9} {'ratio':>7} {'add_err':>8}"
        lines = [head, "-" * len(head)]
        counts = {}
        for row in self.aggressors:
            c = counts.setdefault(row["victim_net"], [0, 0])
            c[0 if row["classification"] == TSI else 1] += 1
        for nid in sorted(self.stages):
            s = self.stages[nid]
            ddr = s.delta_total / s.d_stage if s.d_stage > 0 else math.nan
            tsi, fsi = counts.get(nid, (0, 0))
            flag = "-" if s.delta_total < 0 else " "
            line = (f"{nid:>6} {s.d_driver:9.3f} {s.d_net:9.3f} {s.delta_total:8.3f} {s.d_stage:9.3f} "
                    f"{ddr:7.4f}{flag} {tsi:>4} {fsi:>4}")
            if gold:
                g = self.golden.get(nid)
                if g:
                    line += f" {g['d_stage']:9.3f} {g['ratio']:7.4f} {g['additivity_error']:8.3f}"
            lines.append(line)
        t = self.totals
        lines.append("-" * len(head))
        lines.append(f"TSI {t['tsi']}  FSI {t['fsi']}  worst DDR net {t['worst_ddr_net']} "
                     f"({t['worst_ddr']:.4f})")
        if gold:
            lines.append(f"accuracy_ratio {t['accuracy_ratio']:.4f}  stage R2 {t['stage_r2']:.4f}  "
                         f"mean |additivity error| {t['mean_abs_additivity_error']:.3f} ps")
        return "\n".join(lines)


def build_report(design: Design, model, pairs=None, w_max: float | None = None, oracle=None,
                 threshold: float = DEFAULT_THRESHOLD, paths=(), windows=None) -> CrosstalkReport:
    """Predicted stage delays of every net, with golden columns when ``oracle`` is given.

    ``oracle`` is an OracleResults; ``paths`` is a list of net id sequences.
    ``windows`` overrides the timing windows derived from ``pairs``.
    """
    from .model import SegmentInput, predict_stage, r2_score

    if w_max is None:
        w_max = default_w_max(design)
    if pairs is None:
        pairs = extract_coupling_pairs(design, w_max)
    if windows is None:
        windows = net_windows(design, pairs)
    strongest = strongest_aggressors(design, pairs)
    by_seg = {}
    for p in directed_pairs(pairs):
        by_seg.setdefault(p.victim_segment_id, []).append(p)

    stages, rows = {}, []
    for nid in sorted(design.nets):
        inputs = []
        for sid in design.nets[nid].segments:
            fv = pair_feature_vector(design, sid, strongest.get(sid), windows, w_max)
            aggs = tuple((p.aggressor_segment_id, pair_feature_vector(design, sid, p, windows, w_max))
                         for p in by_seg.get(sid, ()))
            inputs.append(SegmentInput(sid, fv, aggs))
        d_drv = windows[nid].early - design.drivers[nid].at_in
        pred = predict_stage(inputs, model, d_driver=d_drv)
        pos = {sid: i for i, sid in enumerate(design.nets[nid].segments)}
        stages[nid] = stage_delay(nid, pred.d_driver, [pred.tau_nosi[s] for s in design.nets[nid].segments],
                                  {pos[s]: d for s, d in pred.delta.items()}, design.nets[nid].segments)
        tsi = set(pred.tsi_pairs)
        per_pair = pred.pair_delta
        for sid in design.nets[nid].segments:
            for p in by_seg.get(sid, ()):
                key = (sid, p.aggressor_segment_id)
                row = {"victim_net": nid, "victim_segment": sid, "aggressor_segment": p.aggressor_segment_id,
                       "aggressor_net": design.segments[p.aggressor_segment_id].net_id,
                       "dskew": windows[nid].early - windows[design.segments[p.aggressor_segment_id].net_id].early,
                       "classification": TSI if key in tsi else FSI,
                       "delta": per_pair.get(key, 0.0)}
                if oracle is not None:
                    row["oracle_delta"] = oracle.pairs[key].delta
                    row["oracle_classification"] = TSI if abs(row["oracle_delta"]) > threshold else FSI
                rows.append(row)

    n_tsi = sum(r["classification"] == TSI for r in rows)
    ddr = {n: s.delta_total / s.d_stage for n, s in stages.items() if s.d_stage > 0}
    worst = max(sorted(ddr), key=lambda n: abs(ddr[n]), default=None)
    totals = {"nets": len(stages), "pairs": len(rows), "tsi": n_tsi, "fsi": len(rows) - n_tsi,
              "worst_ddr_net": worst, "worst_ddr": ddr.get(worst, 0.0),
              "negative_ddr_nets": sorted(n for n, v in ddr.items() if v < 0)}
    golden = {}
    if oracle is not None:
        oracle_pair_sum = {}
        for r in rows:
            if r["oracle_classification"] == TSI:
                oracle_pair_sum[r["victim_net"]] = oracle_pair_sum.get(r["victim_net"], 0.0) + r["oracle_delta"]
        for nid, s in stages.items():
            g = oracle.nets[nid]
            golden[nid] = {"d_stage": g.d_stage_si, "d_stage_nosi": g.d_stage_nosi, "delta": g.delta,
                           "ratio": s.d_stage / g.d_stage_si if g.d_stage_si > 0 else math.nan,
                           "additivity_error": oracle_pair_sum.get(nid, 0.0) - g.delta}
        gd = np.array([golden[n]["d_stage"] for n in sorted(stages)])
        pd = np.array([stages[n].d_stage for n in sorted(stages)])
        keep = gd > 1.0
        totals["accuracy_ratio"] = float(np.mean(pd[keep] / gd[keep])) if keep.any() else math.nan
        totals["stage_r2"] = r2_score(gd, pd)
        totals["mean_abs_additivity_error"] = float(np.mean([abs(g["additivity_error"]) for g in golden.values()]))
    report = CrosstalkReport(design.name, stages, rows, totals, golden)
    report.paths = [path_delay([stages[n] for n in p]) for p in paths]
    return report

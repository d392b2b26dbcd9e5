"""Bulk oracle labels for a whole design.

Every simulation here is linear, so one run per network yields the unit
response of each source; any arrangement of edges is then a shifted, signed
sum of those responses. One two-net run per extracted pair gives both of its
directed deltas. One run per victim net (all of its aggressor nets attached)
gives the quiet per-segment delays and the golden multi-aggressor stage
delay.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import oracle
from .layout import CouplingPair, Design, driver_timing, net_coupling_cap
from .oracle import SETTLE_TAUS, build_network, crossing_times, default_dt, modal_unit_responses
from .timing import DEFAULT_THRESHOLD, label_dataset

HALF = 0.5  # thresholds below are on waveforms normalized to a 0 -> 1 victim edge


@dataclass(frozen=True)
class PairResult:
    """Directed single-aggressor result; net delays are driver output to sink."""

    victim_segment_id: int
    aggressor_segment_id: int
    d_noSI: float
    d_SI: float
    delta: float
    glitch: bool = False


@dataclass(frozen=True)
class NetResult:
    """Per-net quiet segment delays and golden stage delays (driver input to sink)."""

    net_id: int
    tau_nosi: dict  # segment id -> ps; first segment measured from at_in + table delay
    d_driver: float  # table delay
    d_stage_nosi: float
    d_stage_si: float
    glitch: bool = False

    @property
    def delta(self) -> float:
        return self.d_stage_si - self.d_stage_nosi


@dataclass
class OracleResults:
    design_name: str
    pairs: dict  # (victim seg, aggressor seg) -> PairResult
    nets: dict  # net id -> NetResult
    segments_per_wire: int = 8
    direction: str = "opposite"

    def deltas(self) -> dict:
        return {k: r.delta for k, r in self.pairs.items()}

    def to_dict(self) -> dict:
        return {
            "design": self.design_name,
            "segments_per_wire": self.segments_per_wire,
            "direction": self.direction,
            "pairs": [asdict(self.pairs[k]) for k in sorted(self.pairs)],
            "nets": [dict(asdict(self.nets[k]), tau_nosi={str(s): v for s, v in self.nets[k].tau_nosi.items()})
                     for k in sorted(self.nets)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> OracleResults:
        pairs = {}
        for p in d["pairs"]:
            r = PairResult(**p)
            pairs[(r.victim_segment_id, r.aggressor_segment_id)] = r
        nets = {}
        for n in d["nets"]:
            n = dict(n)
            n["tau_nosi"] = {int(s): float(v) for s, v in n["tau_nosi"].items()}
            nets[n["net_id"]] = NetResult(**n)
        return cls(d["design"], pairs, nets, d.get("segments_per_wire", 8), d.get("direction", "opposite"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> OracleResults:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def edge_start(design: Design, net_id: int) -> float:
    """Start of the driver's source ramp (50% point at at_in + intrinsic delay)."""
    drv = design.drivers[net_id]
    return drv.at_in + drv.d_intrinsic - 0.5 * drv.s_in / 0.8


def _unit_run(net, dt, offsets=()):
    """(dt, t_end) for a unit-response run.

    An aggressor that starts ``-off`` before the victim is read ``-off`` past
    the victim's time frame, so the run is lengthened to cover it. Beyond one
    settle horizon its response is taken at its final value, zero.
    """
    _, rc_max = net.time_constants()
    ramp = max(s.stimulus.duration for s in net.sources)
    dt = default_dt(net) if dt is None else dt
    t_end = ramp + SETTLE_TAUS * rc_max
    early = [-off for off in offsets if 0 < -off < t_end]
    return dt, t_end + max(early, default=0.0)


def _si_crossing(t, r_self, aggs, sign):
    """Last 0.5 crossing of ``r_self(tau) + sign * sum r_a(tau - off)``.

    ``aggs`` is a list of (response, offset). The grid is extended past each
    late aggressor so a glitch after the victim settles is still seen.
    """
    offs = [off for _, off in aggs if off > 0]
    tau = np.unique(np.concatenate([t] + [t + off for off in offs])) if offs else t
    w = np.interp(tau, t, r_self)
    for r, off in aggs:
        w = w + sign * np.interp(tau - off, t, r, left=0.0, right=0.0)
    times = crossing_times(tau, w, HALF)
    if not len(times):
        raise oracle.NoCrossingError("victim never settles past 50% with aggressors switching")
    return float(times[-1]), len(times) > 1


def _last(t, r):
    times = crossing_times(t, r, HALF)
    if not len(times):
        raise oracle.NoCrossingError("no 50% crossing in quiet run")
    return float(times[-1])


def simulate_pair(design: Design, pair: CouplingPair, segments_per_wire: int = 8, dt=None,
                  direction: str = "opposite"):
    """Both directed results of one extracted pair from a single two-net run."""
    sa = design.segments[pair.victim_segment_id]
    sb = design.segments[pair.aggressor_segment_id]
    na, nb = design.nets[sa.net_id], design.nets[sb.net_id]
    net = build_network(na, [nb], [pair], design, segments_per_wire)
    start = {na.id: edge_start(design, na.id), nb.id: edge_start(design, nb.id)}
    gap = start[nb.id] - start[na.id]
    dt, t_end = _unit_run(net, dt, (gap, -gap))
    ta, tb = net.taps[na.id], net.taps[nb.id]
    probes = [ta.node0, ta.sink, tb.node0, tb.sink]
    t, r = modal_unit_responses(net, dt, t_end, probes)
    sign = -1.0 if direction == "opposite" else 1.0
    out = []
    for (v, a, pv0, pvs, cv, ca, p) in ((na, nb, 0, 1, 0, 1, pair), (nb, na, 2, 3, 1, 0, pair.swapped())):
        t_ref = _last(t, r[:, pv0, cv])
        t_q = _last(t, r[:, pvs, cv])
        t_si, glitch = _si_crossing(t, r[:, pvs, cv], [(r[:, pvs, ca], start[a.id] - start[v.id])], sign)
        out.append(PairResult(p.victim_segment_id, p.aggressor_segment_id, t_q - t_ref, t_si - t_ref,
                              t_si - t_q, glitch))
    return out


def simulate_net(design: Design, net_id: int, pairs, segments_per_wire: int = 8, dt=None,
                 direction: str = "opposite", all_pairs=None) -> NetResult:
    """Quiet per-segment delays and golden stage delays of one victim net.

    ``pairs`` are the extracted pairs touching this net; pairs among its
    aggressor nets are taken from ``all_pairs`` when given (a list, or a
    mapping from net id to the pairs touching that net).
    """
    victim = design.nets[net_id]
    agg_ids = sorted({design.segments[s].net_id for p in pairs
                      for s in (p.victim_segment_id, p.aggressor_segment_id)} - {net_id})
    members = {net_id, *agg_ids}
    if all_pairs is None:
        sub = pairs
    elif isinstance(all_pairs, dict):  # net id -> pairs touching it
        sub = sorted({p for m in members for p in all_pairs[m]
                      if design.segments[p.victim_segment_id].net_id in members
                      and design.segments[p.aggressor_segment_id].net_id in members})
    else:
        sub = [p for p in all_pairs
               if design.segments[p.victim_segment_id].net_id in members
               and design.segments[p.aggressor_segment_id].net_id in members]
    aggs = [design.nets[a] for a in agg_ids]
    net = build_network(victim, aggs, sub, design, segments_per_wire)
    t0 = edge_start(design, net_id)
    offs = {a: edge_start(design, a) - t0 for a in agg_ids}
    dt, t_end = _unit_run(net, dt, offs.values())
    taps = net.taps[net_id]
    seg_ids = list(victim.segments)
    probes = [taps.node0] + [taps.seg_nodes[s][1] for s in seg_ids]
    t, r = modal_unit_responses(net, dt, t_end, probes)
    drv = design.drivers[net_id]
    d_tab, *_ = driver_timing(design, net_id, net_coupling_cap(design, net_id, pairs))
    prev = drv.at_in + d_tab - t0  # reference for the first segment, victim-edge time frame
    tau = {}
    for i, s in enumerate(seg_ids):
        cur = _last(t, r[:, i + 1, 0])
        tau[s] = cur - prev
        prev = cur
    sink = len(probes) - 1
    t_q = _last(t, r[:, sink, 0])
    sign = -1.0 if direction == "opposite" else 1.0
    col = {a: net.source_of(a) for a in agg_ids}
    t_si, glitch = _si_crossing(t, r[:, sink, 0],
                                [(r[:, sink, col[a]], offs[a]) for a in agg_ids], sign)
    at_in_frame = drv.at_in - t0
    return NetResult(net_id, tau, d_tab, t_q - at_in_frame, t_si - at_in_frame, glitch)


def _pairs_by_net(design, pairs):
    by = {nid: [] for nid in design.nets}
    for p in pairs:
        a = design.segments[p.victim_segment_id].net_id
        b = design.segments[p.aggressor_segment_id].net_id
        by[a].append(p)
        by[b].append(p)
    return by


def _pair_chunk(args):
    design, chunk, spw, dt, direction = args
    return [r for p in chunk for r in simulate_pair(design, p, spw, dt, direction)]


def _net_chunk(args):
    design, chunk, by_net, pairs, spw, dt, direction = args
    return [simulate_net(design, n, by_net[n], spw, dt, direction, by_net) for n in chunk]


def _chunks(items, n):
    size = max(1, -(-len(items) // max(1, n)))
    return [items[i:i + size] for i in range(0, len(items), size)]


def label_design(design: Design, pairs, segments_per_wire: int = 8, dt=None,
                 direction: str = "opposite", jobs: int = 1, nets=None) -> OracleResults:
    """Oracle results for every extracted pair and every net (or only ``nets``).

    Output is keyed by ids, so it does not depend on ``jobs``.
    """
    pairs = sorted(pairs)
    by_net = _pairs_by_net(design, pairs)
    net_ids = sorted(design.nets) if nets is None else sorted(nets)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            pr = [r for part in ex.map(_pair_chunk, [(design, c, segments_per_wire, dt, direction)
                                                      for c in _chunks(pairs, 4 * jobs)]) for r in part]
            nr = [r for part in ex.map(_net_chunk, [(design, c, by_net, pairs, segments_per_wire, dt, direction)
                                                     for c in _chunks(net_ids, 4 * jobs)]) for r in part]
    else:
        pr = _pair_chunk((design, pairs, segments_per_wire, dt, direction))
        nr = _net_chunk((design, net_ids, by_net, pairs, segments_per_wire, dt, direction))
    return OracleResults(design.name, {(r.victim_segment_id, r.aggressor_segment_id): r for r in pr},
                         {r.net_id: r for r in nr}, segments_per_wire, direction)


def pair_labels(design: Design, pairs, results: OracleResults, threshold: float = DEFAULT_THRESHOLD):
    return label_dataset(design, pairs, results.deltas(), threshold)

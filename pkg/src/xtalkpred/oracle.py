"""Coupled distributed-RC transient oracle.

Wires become pi-section ladders, coupling pairs become floating capacitors,
drivers become ramp sources behind their output resistance. The nodal system
``C dv/dt + G v = i(t)`` is integrated with fixed-step backward Euler.

Unit system: kOhm, fF, ps (so R*C is directly in ps), volts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import splu

from . import kernels
from .layout import (Design, Net, coupling_capacitance, driver_timing,
                     net_coupling_cap)

VDD = 0.8
DT_DIVISOR = 100.0
SETTLE_TAUS = 5.0

__all__ = [
    "VDD", "RampStimulus", "Source", "RCNetwork", "Waveforms", "DelayResult",
    "OracleError", "SingularNetworkError", "NoCrossingError", "GlitchError",
    "build_network", "simulate_transient", "measure_delay", "crossing_time", "crossing_times",
    "delta_delay", "sweep_skew", "SweepConfig", "default_dt", "lumped_rc",
    "unit_responses", "modal_unit_responses",
]


class OracleError(Exception):
    pass


class SingularNetworkError(OracleError):
    pass


class NoCrossingError(OracleError):
    pass


class GlitchError(OracleError):
    def __init__(self, times):
        self.times = list(times)
        super().__init__("multiple final crossings at t = " + ", ".join(f"{t:.4f}" for t in self.times))


@dataclass(frozen=True)
class RampStimulus:
    """Linear edge. ``transition`` is the 10-90% time; 0 means an ideal step."""

    t0: float
    transition: float
    direction: str = "rise"
    v_low: float = 0.0
    v_high: float = VDD

    @classmethod
    def centered(cls, t50, transition, direction="rise", v_low=0.0, v_high=VDD):
        return cls(t50 - 0.5 * transition / 0.8, transition, direction, v_low, v_high)

    @property
    def duration(self) -> float:
        return self.transition / 0.8

    @property
    def t50(self) -> float:
        return self.t0 + 0.5 * self.duration

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    @property
    def initial(self) -> float:
        return self.v_low if self.direction == "rise" else self.v_high

    @property
    def final(self) -> float:
        return self.v_high if self.direction == "rise" else self.v_low

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.duration > 0:
            frac = np.clip((t - self.t0) / self.duration, 0.0, 1.0)
        else:
            frac = (t >= self.t0).astype(float)
        return self.initial + (self.final - self.initial) * frac


@dataclass(frozen=True)
class Source:
    """Thevenin source into ``node``; ``stimulus=None`` holds it at ``level``."""

    node: int
    r: float
    stimulus: RampStimulus | None = None
    level: float = 0.0
    net_id: int | None = None

    @property
    def initial(self) -> float:
        return self.level if self.stimulus is None else self.stimulus.initial

    def value(self, t):
        if self.stimulus is None:
            return np.full(np.shape(t), self.level, dtype=float)
        return self.stimulus.value(t)


@dataclass(frozen=True)
class NetTaps:
    """Node indices of one net inside an RCNetwork."""

    net_id: int
    node0: int
    sink: int
    seg_nodes: dict  # segment id -> (start node, end node)
    tau: float  # Elmore estimate of the net incl. its driver, ps


@dataclass
class RCNetwork:
    n_nodes: int
    cg: np.ndarray
    resistors: list  # (a, b, kOhm)
    couplings: list  # (a, b, fF)
    sources: list
    names: list = field(default_factory=list)
    taps: dict = field(default_factory=dict)

    def with_sources(self, sources) -> RCNetwork:
        return replace(self, sources=list(sources))

    def source_of(self, net_id) -> int:
        for i, s in enumerate(self.sources):
            if s.net_id == net_id:
                return i
        raise KeyError(net_id)

    def matrices(self):
        n = self.n_nodes
        rows, cols, vals = [], [], []
        for a, b, r in self.resistors:
            g = 1.0 / r
            rows += [a, b, a, b]
            cols += [a, b, b, a]
            vals += [g, g, -g, -g]
        for s in self.sources:
            rows.append(s.node)
            cols.append(s.node)
            vals.append(1.0 / s.r)
        G = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        rows, cols, vals = list(range(n)), list(range(n)), list(self.cg)
        for a, b, c in self.couplings:
            rows += [a, b, a, b]
            cols += [a, b, b, a]
            vals += [c, c, -c, -c]
        C = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return G, C

    def dense_matrices(self):
        """(G, C) as dense arrays; cheaper than sparse assembly for small networks."""
        n = self.n_nodes
        G = np.zeros((n, n))
        C = np.diag(np.asarray(self.cg, dtype=float))
        for M, items, conv in ((G, self.resistors, lambda r: 1.0 / r), (C, self.couplings, float)):
            if items:
                a, b, x = (np.asarray(col) for col in zip(*items))
                a = a.astype(np.int64)
                b = b.astype(np.int64)
                x = np.array([conv(v) for v in x], dtype=float)
                np.add.at(M, (a, a), x)
                np.add.at(M, (b, b), x)
                np.add.at(M, (a, b), -x)
                np.add.at(M, (b, a), -x)
        for s in self.sources:
            G[s.node, s.node] += 1.0 / s.r
        return G, C

    def check(self):
        """Raise if some node has no resistive path to a source."""
        if np.any(self.cg < 0) or any(c < 0 for _, _, c in self.couplings):
            raise OracleError("negative capacitance")
        if any(r <= 0 for _, _, r in self.resistors):
            raise OracleError("non-positive resistance")
        parent = list(range(self.n_nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, _ in self.resistors:
            parent[find(a)] = find(b)
        driven = {find(s.node) for s in self.sources}
        for i in range(self.n_nodes):
            if find(i) not in driven:
                label = self.names[i] if i < len(self.names) else str(i)
                raise SingularNetworkError(f"node {i} ({label}) has no resistive path to a source")

    def time_constants(self):
        """(smallest, largest) driver-level RC estimate over the sources."""
        if self.taps:
            taus = [t.tau for t in self.taps.values()]
        else:
            # lumped fallback: r_src times the whole capacitance of its component
            total = float(self.cg.sum()) + sum(c for _, _, c in self.couplings)
            taus = [s.r * total + sum(r for _, _, r in self.resistors) * total for s in self.sources]
        return min(taus), max(taus)


@dataclass
class Waveforms:
    t: np.ndarray
    v: np.ndarray  # (n_steps + 1, n_nodes) or (n_steps + 1, n_probes)
    nodes: np.ndarray  # node index of each column
    dt: float

    def column(self, node) -> np.ndarray:
        hit = np.flatnonzero(self.nodes == node)
        if not len(hit):
            raise KeyError(f"node {node} was not recorded")
        return self.v[:, hit[0]]


@dataclass(frozen=True)
class DelayResult:
    d_noSI: float
    d_SI: float
    delta: float
    aggressor_delays: dict


# ---------------------------------------------------------------------------
# network construction

def lumped_rc(r: float, c: float, stimulus: RampStimulus) -> RCNetwork:
    """Single RC: source -- r -- node 0 -- c -- ground."""
    return RCNetwork(1, np.array([float(c)]), [], [], [Source(0, r, stimulus)], names=["out"])


def _net_nodes(design, net, spw, builder):
    """Append ladder nodes for ``net``; return taps and node positions."""
    segs = design.net_segments(net.id)
    first = builder.node(f"n{net.id}:drv")
    node0 = first
    seg_nodes = {}
    positions = {}
    prev_end = first
    c_wire = 0.0
    r_wire = 0.0
    elmore = 0.0  # sum over nodes of R_upstream * C_node, driver excluded
    r_up = 0.0
    for seg in segs:
        layer = design.layers[seg.layer_id]
        width = design.seg_width(seg)
        sec_len = seg.length / spw
        r_sec = layer.r_sheet * sec_len / width / 1000.0
        c_sec = layer.c_area * sec_len
        nodes = [prev_end]
        for k in range(1, spw + 1):
            nodes.append(builder.node(f"n{net.id}:s{seg.id}:{k}"))
        for k in range(spw):
            builder.resistor(nodes[k], nodes[k + 1], r_sec)
            builder.cg[nodes[k]] += 0.5 * c_sec
            builder.cg[nodes[k + 1]] += 0.5 * c_sec
            r_up += r_sec
            elmore += r_up * c_sec
        c_wire += c_sec * spw
        r_wire += r_sec * spw
        seg_nodes[seg.id] = (nodes[0], nodes[-1])
        positions[seg.id] = nodes
        prev_end = nodes[-1]
    builder.cg[prev_end] += net.sink_cap
    elmore += r_up * net.sink_cap
    return node0, prev_end, seg_nodes, positions, c_wire + net.sink_cap, elmore


class _Builder:
    def __init__(self):
        self.names = []
        self.cg = []
        self.resistors = []

    def node(self, name):
        self.names.append(name)
        self.cg.append(0.0)
        return len(self.names) - 1

    def resistor(self, a, b, r):
        self.resistors.append((a, b, r))


def _nearest_node(seg, nodes, coord):
    lo, hi = seg.span()
    a = seg.start[0] if seg.horizontal else seg.start[1]
    frac = abs(coord - a) / (hi - lo)
    return nodes[int(round(frac * (len(nodes) - 1)))]


def build_network(victim: Net, aggressors, pairs, design: Design, segments_per_wire: int = 8,
                  stimuli: dict | None = None) -> RCNetwork:
    """Coupled ladder network for ``victim`` and ``aggressors``.

    Sources default to each driver's own edge (input transition, direction,
    input arrival + intrinsic delay as the 50% time); ``stimuli`` maps net id to
    a RampStimulus, or to None to hold that driver quiet.
    """
    if segments_per_wire < 1:
        raise ValueError("segments_per_wire must be >= 1")
    nets = [victim] + [a for a in aggressors if a.id != victim.id]
    b = _Builder()
    info = {}
    seg_pos = {}
    for net in nets:
        node0, sink, seg_nodes, positions, c_net, elmore = _net_nodes(design, net, segments_per_wire, b)
        info[net.id] = (node0, sink, seg_nodes, c_net, elmore)
        seg_pos.update(positions)
    couplings = []
    cc_per_net = {n.id: 0.0 for n in nets}
    for p in pairs:
        sa = design.segments.get(p.victim_segment_id)
        sb = design.segments.get(p.aggressor_segment_id)
        if sa is None or sb is None or sa.id not in seg_pos or sb.id not in seg_pos:
            raise OracleError(f"pair ({p.victim_segment_id}, {p.aggressor_segment_id}) references "
                              "a segment outside the given nets")
        lo = max(sa.span()[0], sb.span()[0])
        hi = min(sa.span()[1], sb.span()[1])
        mid = 0.5 * (lo + hi)
        na = _nearest_node(sa, seg_pos[sa.id], mid)
        nb = _nearest_node(sb, seg_pos[sb.id], mid)
        cc = coupling_capacitance(p, design.layers[sa.layer_id])
        couplings.append((na, nb, cc))
        cc_per_net[sa.net_id] += cc
        cc_per_net[sb.net_id] += cc
    sources = []
    taps = {}
    for net in nets:
        node0, sink, seg_nodes, c_net, elmore = info[net.id]
        drv = design.drivers[net.id]
        if stimuli is not None and net.id in stimuli:
            stim = stimuli[net.id]
        else:
            stim = RampStimulus.centered(drv.at_in + drv.d_intrinsic, drv.s_in, drv.direction)
        if stim is None:
            level = 0.0 if drv.direction == "rise" else VDD
            sources.append(Source(node0, drv.r_drive, None, level, net.id))
        else:
            sources.append(Source(node0, drv.r_drive, stim, net_id=net.id))
        tau = drv.r_drive * (c_net + cc_per_net[net.id]) + elmore
        taps[net.id] = NetTaps(net.id, node0, sink, seg_nodes, tau)
    return RCNetwork(len(b.names), np.array(b.cg), b.resistors, couplings, sources, b.names, taps)


# ---------------------------------------------------------------------------
# integration

def default_dt(net: RCNetwork) -> float:
    """min(smallest edge transition, smallest RC) / 100; ideal steps are ignored."""
    rc_min, _ = net.time_constants()
    trs = [s.stimulus.transition for s in net.sources
           if s.stimulus is not None and s.stimulus.transition > 0]
    return min([rc_min] + trs) / DT_DIVISOR


def default_t_end(net: RCNetwork) -> float:
    _, rc_max = net.time_constants()
    ends = [s.stimulus.t_end for s in net.sources if s.stimulus is not None] or [0.0]
    return max(ends) + SETTLE_TAUS * rc_max


class _Factored:
    """(G + C/dt) factored once; reusable for any source waveforms."""

    def __init__(self, net: RCNetwork, dt: float):
        net.check()
        self.net = net
        self.dt = dt
        G, C = net.matrices()
        self.G = G.tocsc()
        cdt = (C / dt).tocsr()
        cdt.sort_indices()
        self.cdt = cdt
        try:
            lu = splu((G + C / dt).tocsc())
        except RuntimeError as exc:  # pragma: no cover - guarded by check()
            raise SingularNetworkError(str(exc)) from None
        self.lu = lu
        self.l_parts = _strict_csc(lu.L)
        self.u_parts = _strict_csc(lu.U)
        self.perm_r = lu.perm_r.astype(np.int64)
        self.perm_c = lu.perm_c.astype(np.int64)

    def dc(self, levels):
        """Operating point with each source at ``levels[i]``."""
        b = np.zeros(self.net.n_nodes)
        for s, lv in zip(self.net.sources, levels):
            b[s.node] += lv / s.r
        return splu(self.G).solve(b)

    def run(self, v0, inj_node, inj_g, inj_col, u, probes):
        return kernels.be_integrate(
            *self.l_parts, *self.u_parts, self.perm_r, self.perm_c,
            self.cdt.indptr.astype(np.int32), self.cdt.indices.astype(np.int32), self.cdt.data,
            np.ascontiguousarray(v0, dtype=float),
            np.asarray(inj_node, dtype=np.int64), np.asarray(inj_g, dtype=float),
            np.asarray(inj_col, dtype=np.int64), np.ascontiguousarray(u, dtype=float),
            np.asarray(probes, dtype=np.int64))


def _strict_csc(M):
    M = M.tocsc()
    M.sort_indices()
    n = M.shape[0]
    diag = M.diagonal().astype(float)
    cols = np.repeat(np.arange(n), np.diff(M.indptr))
    keep = M.indices != cols
    counts = np.bincount(cols[keep], minlength=n)
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
    return ptr, M.indices[keep].astype(np.int32), M.data[keep].astype(float), diag


def simulate_transient(net: RCNetwork, dt: float | None = None, t_end: float | None = None,
                       probes=None, vdd: float = VDD) -> Waveforms:
    """Backward-Euler transient of ``net`` on a uniform grid starting at t = 0.

    The initial state is the DC operating point with every source at its
    pre-edge level. ``probes`` limits the recorded nodes (all by default).
    """
    dt = default_dt(net) if dt is None else dt
    t_end = default_t_end(net) if t_end is None else t_end
    if not dt > 0:
        raise ValueError("dt must be > 0")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n_steps + 1) * dt
    fac = _Factored(net, dt)
    v0 = fac.dc([s.initial for s in net.sources])
    probes = np.arange(net.n_nodes) if probes is None else np.asarray(probes, dtype=np.int64)
    u = np.stack([s.value(t[1:]) for s in net.sources], axis=1) if net.sources else np.zeros((n_steps, 0))
    out = fac.run(v0[:, None], [s.node for s in net.sources], [1.0 / s.r for s in net.sources],
                  [0] * len(net.sources), u, probes)
    v = out[:, :, 0]
    if not np.all(np.isfinite(v)):
        bad = np.argwhere(~np.isfinite(v))[0]
        raise OracleError(f"non-finite voltage at t={t[bad[0]]:.4f} ps, node {probes[bad[1]]}")
    rails = [x for s in net.sources for x in ((s.stimulus.v_low, s.stimulus.v_high) if s.stimulus else (s.level,))]
    lo, hi = min(rails + [0.0]), max(rails + [vdd])
    margin = 0.2 * (hi - lo)
    if v.min() < lo - margin or v.max() > hi + margin:
        raise OracleError(f"voltage left [{lo - margin:.3f}, {hi + margin:.3f}] V (solver divergence)")
    return Waveforms(t, v, probes, dt)


def unit_responses(net: RCNetwork, dt: float, t_end: float, probes):
    """Response at ``probes`` to a 0->1 ramp on each source alone (others held at 0).

    Each ramp starts at t = 0 with that source's transition. Returns (t, r)
    with r of shape (n_steps + 1, n_probes, n_sources). By linearity any mix
    of edges is a shifted, signed sum of these columns.
    """
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n_steps + 1) * dt
    fac = _Factored(net, dt)
    k = len(net.sources)
    out = fac.run(np.zeros((net.n_nodes, k)), [s.node for s in net.sources],
                  [1.0 / s.r for s in net.sources], list(range(k)), _ramp_inputs(net, t), probes)
    return t, out


def _ramp_inputs(net, t):
    u = np.empty((len(t) - 1, len(net.sources)))
    for i, s in enumerate(net.sources):
        tr = s.stimulus.transition if s.stimulus is not None else 0.0
        u[:, i] = RampStimulus(0.0, tr, "rise", 0.0, 1.0).value(t[1:])
    return u


def modal_unit_responses(net: RCNetwork, dt: float, t_end: float, probes):
    """Same result as :func:`unit_responses`, computed in the modal basis.

    With ``G x = lam C x`` (C-orthonormal modes) the backward-Euler update
    decouples into ``z <- z / (1 + lam dt) + dt beta u / (1 + lam dt)`` per
    mode, which is exact BE arithmetic without a sparse solve per step. Meant
    for the small networks of bulk labeling.
    """
    net.check()
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n_steps + 1) * dt
    G, C = net.dense_matrices()
    lam, X = eigh(G, C)
    mu = 1.0 / (1.0 + lam * dt)
    b = np.zeros((net.n_nodes, len(net.sources)))
    for i, s in enumerate(net.sources):
        b[s.node, i] = 1.0 / s.r
    gain = np.ascontiguousarray((X.T @ b) * (mu * dt)[:, None])
    xp = np.ascontiguousarray(X[np.asarray(probes, dtype=np.int64)])
    out = kernels.modal_integrate(np.ascontiguousarray(mu), gain, xp, _ramp_inputs(net, t))
    return t, out


# ---------------------------------------------------------------------------
# measurement

def crossing_times(t, v, threshold):
    """All crossings of ``threshold`` in the direction of the final transition."""
    s = np.asarray(v) - threshold
    if s[-1] > 0:
        idx = np.flatnonzero((s[:-1] <= 0) & (s[1:] > 0))
    else:
        idx = np.flatnonzero((s[:-1] >= 0) & (s[1:] < 0))
    frac = s[idx] / (s[idx] - s[idx + 1])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def crossing_time(t, v, threshold, strict=False):
    """Time of the final crossing of ``threshold`` (linear interpolation).

    Only crossings in the direction of the final transition count. With more
    than one such crossing the last is returned (``strict`` raises instead).
    """
    times = crossing_times(np.asarray(t), v, threshold)
    if not len(times):
        raise NoCrossingError("no crossing of the threshold in the final direction")
    if len(times) > 1 and strict:
        raise GlitchError(times)
    return float(times[-1])


def measure_delay(w: Waveforms, node_in, node_out, vdd: float = VDD, strict: bool = False) -> float:
    """50%-to-50% delay from ``node_in`` to ``node_out``."""
    th = 0.5 * vdd
    t_in = crossing_time(w.t, w.column(node_in), th, strict)
    if node_out == node_in:
        return 0.0
    return crossing_time(w.t, w.column(node_out), th, strict) - t_in


# ---------------------------------------------------------------------------
# crosstalk experiments

_OPPOSITE = {"rise": "fall", "fall": "rise"}


def _aggressor_stimuli(design, victim, aggressors, pairs, skews, directions):
    """Aggressor edges placed so that AT_out(victim) - AT_out(aggressor) = skew."""
    *_, at_v, _ = driver_timing(design, victim.id, net_coupling_cap(design, victim.id, pairs))
    vdir = design.drivers[victim.id].direction
    stim = {}
    for agg, skew, rel in zip(aggressors, skews, directions):
        drv = design.drivers[agg.id]
        d_a, *_ = driver_timing(design, agg.id, net_coupling_cap(design, agg.id, pairs))
        at_in = at_v - skew - d_a
        direction = _OPPOSITE[vdir] if rel == "opposite" else vdir
        stim[agg.id] = RampStimulus.centered(at_in + drv.d_intrinsic, drv.s_in, direction)
    return stim


def delta_delay(victim: Net, aggressors, pairs, design: Design, skews, directions=None,
                segments_per_wire: int = 8, dt: float | None = None, vdd: float = VDD) -> DelayResult:
    """Victim net delay with aggressors quiet versus switching at the given skews.

    Net delays are measured from the victim driver-output node's 50% crossing
    in the quiet run, so ``delta`` is the shift of the sink crossing.
    """
    aggressors = list(aggressors)
    skews = list(skews)
    directions = list(directions) if directions is not None else ["opposite"] * len(aggressors)
    if len(skews) != len(aggressors) or len(directions) != len(aggressors):
        raise ValueError("one skew and one direction per aggressor")
    stim = _aggressor_stimuli(design, victim, aggressors, pairs, skews, directions)
    quiet = {a.id: None for a in aggressors}
    net_q = build_network(victim, aggressors, pairs, design, segments_per_wire, quiet)
    net_s = build_network(victim, aggressors, pairs, design, segments_per_wire, stim)
    dt = default_dt(net_s) if dt is None else dt
    t_end = max(default_t_end(net_q), default_t_end(net_s))
    taps = net_s.taps
    probes = sorted({taps[n].node0 for n in taps} | {taps[n].sink for n in taps})
    wq = simulate_transient(net_q, dt, t_end, probes, vdd)
    ws = simulate_transient(net_s, dt, t_end, probes, vdd)
    th = 0.5 * vdd
    tv = taps[victim.id]
    t_ref = crossing_time(wq.t, wq.column(tv.node0), th)
    d_nosi = crossing_time(wq.t, wq.column(tv.sink), th) - t_ref
    d_si = crossing_time(ws.t, ws.column(tv.sink), th) - t_ref
    agg_delays = {}
    for a in aggressors:
        ta = taps[a.id]
        agg_delays[a.id] = measure_delay(ws, ta.node0, ta.sink, vdd)
    return DelayResult(d_nosi, d_si, d_si - d_nosi, agg_delays)


@dataclass
class SweepConfig:
    """Two-net experiment: victim arrival fixed, aggressor input arrival swept."""

    design: Design
    victim_id: int
    aggressor_id: int
    pairs: list
    victim_at_in: float = 100.0
    direction: str = "opposite"
    segments_per_wire: int = 8


def sweep_skew(cfg: SweepConfig, at_min: float, at_max: float, step: float, dt: float | None = None):
    """Rows of (dskew, d_netV, d_netA, delta) for aggressor input arrivals in [at_min, at_max]."""
    if not step > 0:
        raise ValueError("step must be > 0")
    d = cfg.design
    victim = d.nets[cfg.victim_id]
    agg = d.nets[cfg.aggressor_id]
    drv_v = replace(d.drivers[victim.id], at_in=cfg.victim_at_in)
    n = int(math.floor((at_max - at_min) / step + 1e-9)) + 1
    rows = []
    for i in range(n):
        at_a = at_min + i * step
        drivers = dict(d.drivers)
        drivers[victim.id] = drv_v
        drivers[agg.id] = replace(d.drivers[agg.id], at_in=at_a)
        design = Design(d.layers, d.nets, d.segments, drivers, d.meta)
        *_, at_v, _ = driver_timing(design, victim.id, net_coupling_cap(design, victim.id, cfg.pairs))
        *_, at_ag, _ = driver_timing(design, agg.id, net_coupling_cap(design, agg.id, cfg.pairs))
        skew = at_v - at_ag
        res = delta_delay(victim, [agg], cfg.pairs, design, [skew], [cfg.direction],
                          cfg.segments_per_wire, dt)
        rows.append((skew, res.d_SI, res.aggressor_delays[agg.id], res.delta))
    return rows


def write_sweep(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("dskew_ps,d_netV_ps,d_netA_ps,delta_ps\n")
        for r in rows:
            fh.write(",".join(f"{x:.4f}" for x in r) + "\n")

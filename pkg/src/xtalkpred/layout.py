"""Routed-design description and coupling-pair extraction.

Units: lengths in um, times in ps, capacitance in fF, driver resistance in
kOhm, sheet resistance in Ohm/square.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sortedcontainers import SortedList

__all__ = [
    "Layer", "Segment", "DelayTable", "Driver", "Net", "Design", "CouplingPair",
    "DesignError", "DesignParseError", "DesignValidationError",
    "load_design", "save_design", "design_from_dict", "design_to_dict",
    "validate_design", "extract_coupling_pairs", "extract_coupling_pairs_brute",
    "coupling_capacitance", "default_w_max", "translate_design",
]

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


class DesignError(Exception):
    pass


class DesignParseError(DesignError):
    pass


class DesignValidationError(DesignError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(f"{len(self.violations)} violation(s):\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class Layer:
    id: int
    direction: str
    M_W: float
    M_T: float
    M_H: float
    M_eps0: float
    r_sheet: float
    c_area: float
    c_coup_unit: float


@dataclass(frozen=True)
class Segment:
    id: int
    net_id: int
    layer_id: int
    start: tuple[float, float]
    end: tuple[float, float]
    width: float | None = None

    @property
    def horizontal(self) -> bool:
        return self.start[1] == self.end[1]

    @property
    def length(self) -> float:
        return abs(self.end[0] - self.start[0]) + abs(self.end[1] - self.start[1])

    def span(self) -> tuple[float, float]:
        """Interval along the routing axis."""
        a, b = (self.start[0], self.end[0]) if self.horizontal else (self.start[1], self.end[1])
        return (min(a, b), max(a, b))

    def track(self) -> float:
        """Coordinate perpendicular to the routing axis."""
        return self.start[1] if self.horizontal else self.start[0]


@dataclass(frozen=True)
class DelayTable:
    """NLDM-style lookup: (input slew, load cap) -> cell delay and output slew."""

    slew_index: tuple[float, ...]
    load_index: tuple[float, ...]
    delay: tuple[tuple[float, ...], ...]
    slew: tuple[tuple[float, ...], ...]

    def lookup(self, s_in: float, load: float) -> tuple[float, float, bool]:
        """Bilinear interpolation; returns (delay, output slew, clamped)."""
        xs = np.asarray(self.slew_index)
        ys = np.asarray(self.load_index)
        clamped = not (xs[0] <= s_in <= xs[-1] and ys[0] <= load <= ys[-1])
        x = min(max(s_in, xs[0]), xs[-1])
        y = min(max(load, ys[0]), ys[-1])
        i = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2))
        j = int(np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2))
        tx = (x - xs[i]) / (xs[i + 1] - xs[i])
        ty = (y - ys[j]) / (ys[j + 1] - ys[j])

        def interp(tab):
            t = np.asarray(tab)
            return float((1 - tx) * (1 - ty) * t[i, j] + tx * (1 - ty) * t[i + 1, j]
                         + (1 - tx) * ty * t[i, j + 1] + tx * ty * t[i + 1, j + 1])

        return interp(self.delay), interp(self.slew), clamped


@dataclass(frozen=True)
class Driver:
    net_id: int
    r_drive: float
    s_in: float
    direction: str
    at_in: float
    delay_table: DelayTable
    d_intrinsic: float = 0.0


@dataclass(frozen=True)
class Net:
    id: int
    name: str
    segments: tuple[int, ...]
    sink_cap: float


@dataclass
class Design:
    layers: dict[int, Layer]
    nets: dict[int, Net]
    segments: dict[int, Segment]
    drivers: dict[int, Driver]
    meta: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return str(self.meta.get("name", "design"))

    def layer_of(self, seg: Segment) -> Layer:
        return self.layers[seg.layer_id]

    def seg_width(self, seg: Segment) -> float:
        return seg.width if seg.width is not None else self.layers[seg.layer_id].M_W

    def net_segments(self, net_id: int) -> list[Segment]:
        return [self.segments[s] for s in self.nets[net_id].segments]

    def wire_cap(self, net_id: int) -> float:
        return sum(self.layers[s.layer_id].c_area * s.length for s in self.net_segments(net_id))

    def wire_res(self, net_id: int) -> float:
        """Total wire resistance in kOhm."""
        return sum(self.layers[s.layer_id].r_sheet * s.length / self.seg_width(s) / 1000.0
                   for s in self.net_segments(net_id))


@dataclass(frozen=True, order=True)
class CouplingPair:
    victim_segment_id: int
    aggressor_segment_id: int
    L_SI: float
    W_SI: float

    def swapped(self) -> CouplingPair:
        return CouplingPair(self.aggressor_segment_id, self.victim_segment_id, self.L_SI, self.W_SI)


# ---------------------------------------------------------------------------
# serialization

_TOP_KEYS = {"layers", "nets", "segments", "drivers", "meta"}
_LAYER_KEYS = {"id", "direction", "M_W", "M_T", "M_H", "M_eps0", "r_sheet", "c_area", "c_coup_unit"}
_SEG_KEYS = {"id", "net_id", "layer_id", "start", "end", "width"}
_NET_KEYS = {"id", "name", "segments", "sink_cap"}
_DRV_KEYS = {"net_id", "r_drive", "s_in", "direction", "at_in", "delay_table", "d_intrinsic"}
_TABLE_KEYS = {"slew_index", "load_index", "delay", "slew"}


def _check_keys(obj, allowed, where, required=None, out=None):
    if not isinstance(obj, dict):
        raise DesignParseError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise DesignParseError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = (required if required is not None else allowed) - set(obj)
    if missing:
        raise DesignParseError(f"{where}: missing key(s) {sorted(missing)}")


def _num(obj, key, where):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DesignParseError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _point(v, where):
    if (not isinstance(v, list) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise DesignParseError(f"{where}: expected [x, y], got {v!r}")
    return (float(v[0]), float(v[1]))


def design_from_dict(doc: dict, validate: bool = True) -> Design:
    _check_keys(doc, _TOP_KEYS, "<root>")
    layers, nets, segments, drivers = {}, {}, {}, {}
    for i, d in enumerate(doc["layers"]):
        w = f"layers[{i}]"
        _check_keys(d, _LAYER_KEYS, w)
        layer = Layer(int(d["id"]), str(d["direction"]),
                      *(_num(d, k, w) for k in ("M_W", "M_T", "M_H", "M_eps0", "r_sheet", "c_area", "c_coup_unit")))
        if layer.id in layers:
            raise DesignParseError(f"{w}: duplicate layer id {layer.id}")
        layers[layer.id] = layer
    for i, d in enumerate(doc["segments"]):
        w = f"segments[{i}]"
        _check_keys(d, _SEG_KEYS, w, required=_SEG_KEYS - {"width"})
        width = d.get("width")
        if width is not None:
            width = _num(d, "width", w)
        seg = Segment(int(d["id"]), int(d["net_id"]), int(d["layer_id"]),
                      _point(d["start"], w + ".start"), _point(d["end"], w + ".end"), width)
        if seg.id in segments:
            raise DesignParseError(f"{w}: duplicate segment id {seg.id}")
        segments[seg.id] = seg
    for i, d in enumerate(doc["nets"]):
        w = f"nets[{i}]"
        _check_keys(d, _NET_KEYS, w)
        net = Net(int(d["id"]), str(d["name"]), tuple(int(s) for s in d["segments"]), _num(d, "sink_cap", w))
        if net.id in nets:
            raise DesignParseError(f"{w}: duplicate net id {net.id}")
        nets[net.id] = net
    for i, d in enumerate(doc["drivers"]):
        w = f"drivers[{i}]"
        _check_keys(d, _DRV_KEYS, w, required=_DRV_KEYS - {"d_intrinsic"})
        t = d["delay_table"]
        _check_keys(t, _TABLE_KEYS, w + ".delay_table")
        table = DelayTable(tuple(map(float, t["slew_index"])), tuple(map(float, t["load_index"])),
                           tuple(tuple(map(float, r)) for r in t["delay"]),
                           tuple(tuple(map(float, r)) for r in t["slew"]))
        drv = Driver(int(d["net_id"]), _num(d, "r_drive", w), _num(d, "s_in", w), str(d["direction"]),
                     _num(d, "at_in", w), table, float(d.get("d_intrinsic", 0.0)))
        if drv.net_id in drivers:
            raise DesignParseError(f"{w}: second driver for net {drv.net_id}")
        drivers[drv.net_id] = drv
    meta = doc["meta"]
    if not isinstance(meta, dict):
        raise DesignParseError("meta: expected an object")
    design = Design(layers, nets, segments, drivers, dict(meta))
    if validate:
        validate_design(design)
    return design


def design_to_dict(design: Design) -> dict:
    return {
        "layers": [
            {"id": l.id, "direction": l.direction, "M_W": l.M_W, "M_T": l.M_T, "M_H": l.M_H,
             "M_eps0": l.M_eps0, "r_sheet": l.r_sheet, "c_area": l.c_area, "c_coup_unit": l.c_coup_unit}
            for l in sorted(design.layers.values(), key=lambda l: l.id)
        ],
        "nets": [
            {"id": n.id, "name": n.name, "segments": list(n.segments), "sink_cap": n.sink_cap}
            for n in sorted(design.nets.values(), key=lambda n: n.id)
        ],
        "segments": [
            {"id": s.id, "net_id": s.net_id, "layer_id": s.layer_id, "start": list(s.start),
             "end": list(s.end), "width": s.width}
            for s in sorted(design.segments.values(), key=lambda s: s.id)
        ],
        "drivers": [
            {"net_id": d.net_id, "r_drive": d.r_drive, "s_in": d.s_in, "direction": d.direction,
             "at_in": d.at_in, "d_intrinsic": d.d_intrinsic,
             "delay_table": {"slew_index": list(d.delay_table.slew_index),
                             "load_index": list(d.delay_table.load_index),
                             "delay": [list(r) for r in d.delay_table.delay],
                             "slew": [list(r) for r in d.delay_table.slew]}}
            for d in sorted(design.drivers.values(), key=lambda d: d.net_id)
        ],
        "meta": design.meta,
    }


def load_design(path) -> Design:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DesignParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return design_from_dict(doc)
    except DesignParseError as exc:
        raise DesignParseError(f"{path}: {exc}") from None


def save_design(design: Design, path) -> None:
    Path(path).write_text(json.dumps(design_to_dict(design), indent=1, sort_keys=True) + "\n")


def validate_design(design: Design) -> None:
    """Raise DesignValidationError listing every violated invariant."""
    bad = []
    ids = sorted(design.layers)
    if ids != list(range(1, len(ids) + 1)):
        bad.append(f"layer ids must be contiguous from 1, got {ids}")
    for l in design.layers.values():
        if l.direction not in (HORIZONTAL, VERTICAL):
            bad.append(f"layer {l.id}: direction {l.direction!r} not horizontal|vertical")
        for k in ("M_W", "M_T", "M_H", "r_sheet", "c_area", "c_coup_unit"):
            if not getattr(l, k) > 0:
                bad.append(f"layer {l.id}: {k} must be > 0")
        if not l.M_eps0 >= 1:
            bad.append(f"layer {l.id}: M_eps0 must be >= 1")
    for s in design.segments.values():
        if s.net_id not in design.nets:
            bad.append(f"segment {s.id}: net_id {s.net_id} does not exist")
        if s.layer_id not in design.layers:
            bad.append(f"segment {s.id}: layer_id {s.layer_id} does not exist")
        dx = s.start[0] != s.end[0]
        dy = s.start[1] != s.end[1]
        if dx == dy:
            bad.append(f"segment {s.id}: must be axis-aligned with non-zero length")
        if s.width is not None and not s.width > 0:
            bad.append(f"segment {s.id}: width override must be > 0")
    owner = {}
    for n in design.nets.values():
        if n.id not in design.drivers:
            bad.append(f"net {n.id}: has no driver")
        if n.sink_cap < 0:
            bad.append(f"net {n.id}: sink_cap must be >= 0")
        prev = None
        for sid in n.segments:
            seg = design.segments.get(sid)
            if seg is None:
                bad.append(f"net {n.id}: segment {sid} does not exist")
                prev = None
                continue
            if seg.net_id != n.id:
                bad.append(f"net {n.id}: segment {sid} belongs to net {seg.net_id}")
            if sid in owner:
                bad.append(f"segment {sid}: listed by nets {owner[sid]} and {n.id}")
            owner[sid] = n.id
            if prev is not None and prev.end != seg.start:
                bad.append(f"net {n.id}: segment {sid} does not start where segment {prev.id} ends")
            prev = seg
    for s in design.segments.values():
        if s.id not in owner and s.net_id in design.nets:
            bad.append(f"segment {s.id}: not listed in net {s.net_id}")
    for d in design.drivers.values():
        if d.net_id not in design.nets:
            bad.append(f"driver: net_id {d.net_id} does not exist")
        if d.direction not in ("rise", "fall"):
            bad.append(f"driver {d.net_id}: direction {d.direction!r} not rise|fall")
        if not d.r_drive > 0:
            bad.append(f"driver {d.net_id}: r_drive must be > 0")
        if not d.s_in > 0:
            bad.append(f"driver {d.net_id}: s_in must be > 0")
        t = d.delay_table
        for name, axis in (("slew_index", t.slew_index), ("load_index", t.load_index)):
            if len(axis) < 2 or any(b <= a for a, b in zip(axis, axis[1:])):
                bad.append(f"driver {d.net_id}: {name} must be strictly increasing (>= 2 points)")
        for name, tab in (("delay", t.delay), ("slew", t.slew)):
            if len(tab) != len(t.slew_index) or any(len(r) != len(t.load_index) for r in tab):
                bad.append(f"driver {d.net_id}: {name} table shape mismatch")
            elif any(v <= 0 for r in tab for v in r):
                bad.append(f"driver {d.net_id}: {name} entries must be > 0")
    if bad:
        raise DesignValidationError(bad)


def translate_design(design: Design, dx: float, dy: float) -> Design:
    segs = {
        s.id: Segment(s.id, s.net_id, s.layer_id, (s.start[0] + dx, s.start[1] + dy),
                      (s.end[0] + dx, s.end[1] + dy), s.width)
        for s in design.segments.values()
    }
    return Design(dict(design.layers), dict(design.nets), segs, dict(design.drivers), dict(design.meta))


# ---------------------------------------------------------------------------
# coupling extraction

NEIGHBOR_WIDTHS = 10.0  # spacings wider than this many wire widths are not neighbours


def default_w_max(design: Design) -> float:
    """Three times the smallest edge spacing between overlapping same-layer runs of different nets.

    Only neighbours within NEIGHBOR_WIDTHS wire widths count; a design without
    any falls back to three times the narrowest wire width.
    """
    best = math.inf
    for group in _groups(design).values():
        events = sorted(ev for s in group for ev in ((s.span()[0], 1, s.id), (s.span()[1], 0, s.id)))
        by_id = {s.id: s for s in group}
        active = SortedList()
        for _, kind, sid in events:
            s = by_id[sid]
            key = (s.track(), sid)
            if kind == 0:
                active.remove(key)
                continue
            pos = active.bisect_left(key)
            for step, start in ((-1, pos - 1), (1, pos)):
                i = start
                while 0 <= i < len(active):
                    o = by_id[active[i][1]]
                    if o.net_id != s.net_id:
                        sp = _spacing(design, s, o)
                        if sp > 0:
                            if sp <= NEIGHBOR_WIDTHS * design.seg_width(s):
                                best = min(best, sp)
                            break
                    i += step
            active.add(key)
    if not math.isfinite(best):
        widths = [design.seg_width(s) for s in design.segments.values()]
        return 3.0 * min(widths) if widths else 0.0
    return 3.0 * best


def _groups(design):
    groups = {}
    for s in design.segments.values():
        groups.setdefault((s.layer_id, s.horizontal), []).append(s)
    return groups


GEOM_EPS = 1e-9  # um; overlaps and spacings closer than this to a boundary count as on it


def _overlap(a, b):
    return min(a.span()[1], b.span()[1]) - max(a.span()[0], b.span()[0])


def _couples(design, a, b, w_max):
    sp = _spacing(design, a, b)
    return sp > GEOM_EPS and sp <= w_max + GEOM_EPS and _overlap(a, b) > GEOM_EPS


def _spacing(design, a, b):
    return abs(a.track() - b.track()) - 0.5 * (design.seg_width(a) + design.seg_width(b))


def _make_pair(design, a, b):
    sp = _spacing(design, a, b)
    lo = max(a.span()[0], b.span()[0])
    hi = min(a.span()[1], b.span()[1])
    v, g = (a, b) if a.id < b.id else (b, a)
    return CouplingPair(v.id, g.id, hi - lo, sp)


def extract_coupling_pairs(design: Design, w_max: float) -> list[CouplingPair]:
    """Same-layer, same-direction segment pairs within ``w_max`` edge spacing.

    Sweep along the routing axis; the active set is ordered by track so each
    insertion only inspects tracks within reach.
    """
    if not w_max > 0:
        raise ValueError("w_max must be > 0")
    pairs = []
    for group in _groups(design).values():
        max_w = max(design.seg_width(s) for s in group)
        events = []
        for s in group:
            lo, hi = s.span()
            events.append((lo, 1, s.id))
            events.append((hi, 0, s.id))  # removals sort first: touching spans do not overlap
        events.sort()
        by_id = {s.id: s for s in group}
        active = SortedList()
        for _, kind, sid in events:
            s = by_id[sid]
            key = (s.track(), sid)
            if kind == 0:
                active.remove(key)
                continue
            reach = w_max + 0.5 * (design.seg_width(s) + max_w)
            reach += 1e-9 * (1.0 + reach + abs(key[0]))  # window only prefilters; sp decides below
            for track, oid in active.irange((key[0] - reach, -1), (key[0] + reach, math.inf)):
                o = by_id[oid]
                if o.net_id != s.net_id and _couples(design, s, o, w_max):
                    pairs.append(_make_pair(design, s, o))
            active.add(key)
    pairs.sort()
    return pairs


def extract_coupling_pairs_brute(design: Design, w_max: float) -> list[CouplingPair]:
    """O(n^2) reference for ``extract_coupling_pairs``."""
    pairs = []
    segs = sorted(design.segments.values(), key=lambda s: s.id)
    for i, a in enumerate(segs):
        for b in segs[i + 1:]:
            if a.layer_id != b.layer_id or a.horizontal != b.horizontal or a.net_id == b.net_id:
                continue
            if _couples(design, a, b, w_max):
                pairs.append(_make_pair(design, a, b))
    pairs.sort()
    return pairs


def coupling_capacitance(pair: CouplingPair, layer: Layer) -> float:
    """Parallel-plate estimate c_coup_unit * L_SI / W_SI in fF."""
    return layer.c_coup_unit * pair.L_SI / pair.W_SI


# ---------------------------------------------------------------------------
# driver timing (table lookups only; no simulation)

def net_coupling_cap(design: Design, net_id: int, pairs) -> float:
    """Total coupling capacitance attached to ``net_id`` (treated as grounded)."""
    total = 0.0
    for p in sorted(pairs):  # fixed summation order
        a = design.segments[p.victim_segment_id]
        b = design.segments[p.aggressor_segment_id]
        if a.net_id == net_id or b.net_id == net_id:
            total += coupling_capacitance(p, design.layers[a.layer_id])
    return total


def net_load(design: Design, net_id: int, coupling: float = 0.0) -> float:
    return design.wire_cap(net_id) + design.nets[net_id].sink_cap + coupling


def driver_timing(design: Design, net_id: int, coupling: float = 0.0):
    """(cell delay, output slew, output arrival, clamped) from the delay table."""
    drv = design.drivers[net_id]
    d, s_out, clamped = drv.delay_table.lookup(drv.s_in, net_load(design, net_id, coupling))
    return d, s_out, drv.at_in + d, clamped

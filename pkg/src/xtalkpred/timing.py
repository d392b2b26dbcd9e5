"""Timing windows, skew, window-overlap filtering and oracle-derived pair labels."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .layout import (CouplingPair, Design, Net, coupling_capacitance, driver_timing,
                     net_coupling_cap)

TSI = "TSI"
FSI = "FSI"
DEFAULT_THRESHOLD = 1.0


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class TimingWindow:
    early: float
    late: float
    clamped: bool = False

    def __post_init__(self):
        if self.early > self.late:
            raise ValueError(f"window early {self.early} > late {self.late}")


@dataclass(frozen=True)
class PairLabel:
    pair: CouplingPair  # victim_segment_id is the victim side
    dskew: float
    classification: str
    oracle_delta: float | None = None


def delta_skew(victim_at: float, aggressor_at: float) -> float:
    return victim_at - aggressor_at


def window_of(net: Net, design: Design, pairs=()) -> TimingWindow:
    """[at_out, at_out + output slew] from the driver table.

    The table load includes the coupling capacitance of ``pairs`` touching the
    net. ``clamped`` is set when the lookup left the table range.
    """
    cc = net_coupling_cap(design, net.id, pairs)
    _, s_out, at_out, clamped = driver_timing(design, net.id, cc)
    if clamped:
        warnings.warn(f"net {net.id}: delay table lookup clamped", stacklevel=2)
    return TimingWindow(at_out, at_out + s_out, clamped)


def classify_pair(victim_win: TimingWindow, aggr_win: TimingWindow, guard: float = 0.0) -> str:
    if guard < 0:
        raise ValueError("guard must be >= 0")
    lo = max(victim_win.early - guard, aggr_win.early)
    hi = min(victim_win.late + guard, aggr_win.late)
    return TSI if lo <= hi else FSI


def net_windows(design: Design, pairs) -> dict[int, TimingWindow]:
    """Window of every net; the table load includes all of its coupling."""
    cc = {nid: 0.0 for nid in design.nets}
    for p in sorted(pairs):  # fixed summation order
        a = design.segments[p.victim_segment_id]
        b = design.segments[p.aggressor_segment_id]
        c = coupling_capacitance(p, design.layers[a.layer_id])
        cc[a.net_id] += c
        cc[b.net_id] += c
    out = {}
    for nid in sorted(design.nets):
        _, s_out, at_out, clamped = driver_timing(design, nid, cc[nid])
        out[nid] = TimingWindow(at_out, at_out + s_out, clamped)
    return out


def directed_pairs(pairs):
    """Both orientations of every extracted (unordered) pair, sorted."""
    out = list(pairs) + [p.swapped() for p in pairs]
    return sorted(out, key=lambda p: (p.victim_segment_id, p.aggressor_segment_id))


def pair_skew(design: Design, pair: CouplingPair, windows) -> float:
    v = design.segments[pair.victim_segment_id].net_id
    a = design.segments[pair.aggressor_segment_id].net_id
    return delta_skew(windows[v].early, windows[a].early)


def classify_pairs_by_window(design: Design, pairs, guard: float = 0.0) -> dict:
    """Window-rule class of every directed pair, keyed by (victim seg, aggressor seg)."""
    windows = net_windows(design, pairs)
    out = {}
    for p in directed_pairs(pairs):
        v = design.segments[p.victim_segment_id].net_id
        a = design.segments[p.aggressor_segment_id].net_id
        out[(p.victim_segment_id, p.aggressor_segment_id)] = classify_pair(windows[v], windows[a], guard)
    return out


def label_dataset(design: Design, pairs, oracle_deltas: dict, threshold: float = DEFAULT_THRESHOLD):
    """PairLabel for every directed pair from per-pair oracle deltas.

    ``oracle_deltas`` maps (victim seg, aggressor seg) to the oracle delta.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    if threshold == 0:
        warnings.warn("label threshold 0: any nonzero delta is TSI", stacklevel=2)
    windows = net_windows(design, pairs)
    labels = []
    for p in directed_pairs(pairs):
        key = (p.victim_segment_id, p.aggressor_segment_id)
        if key not in oracle_deltas:
            raise LabelError(f"no oracle result for pair {key}")
        delta = float(oracle_deltas[key])
        cls = TSI if abs(delta) > threshold else FSI
        labels.append(PairLabel(p, pair_skew(design, p, windows), cls, delta))
    return labels


def labels_to_list(labels) -> list:
    return [{"victim_segment_id": l.pair.victim_segment_id,
             "aggressor_segment_id": l.pair.aggressor_segment_id,
             "L_SI": l.pair.L_SI, "W_SI": l.pair.W_SI,
             "dskew": l.dskew, "classification": l.classification,
             "oracle_delta": l.oracle_delta} for l in labels]


def labels_from_list(items) -> list[PairLabel]:
    out = []
    for i, d in enumerate(items):
        try:
            pair = CouplingPair(int(d["victim_segment_id"]), int(d["aggressor_segment_id"]),
                                float(d["L_SI"]), float(d["W_SI"]))
            cls = d["classification"]
            if cls not in (TSI, FSI):
                raise LabelError(f"label {i}: classification must be TSI or FSI, got {cls!r}")
            delta = d.get("oracle_delta")
            out.append(PairLabel(pair, float(d["dskew"]), cls, None if delta is None else float(delta)))
        except KeyError as exc:
            raise LabelError(f"label {i}: missing field {exc}") from None
    return out


def save_labels(labels, path) -> None:
    with open(path, "w") as fh:
        json.dump(labels_to_list(labels), fh, indent=1)
        fh.write("\n")


def load_labels(path) -> list[PairLabel]:
    with open(path) as fh:
        try:
            items = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LabelError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(items, list):
        raise LabelError(f"{path}: expected a list of labels")
    return labels_from_list(items)

"""Deterministic synthetic benchmark designs.

Coupled nets are routed in parallel bundles: offset copies of a template
route (straight, or a Z with a jog on the adjacent layer). Straight copies
are also slid along the routing axis so the overlap length varies while every
copy keeps the same load. Every bundle and every isolated net lives in its
own tile, so the only coupling in a design is the intended one.

Input arrivals follow a launch-slot model: each net launches in one of
``n_slots`` slots spaced ``slot_pitch`` apart, plus a small uniform jitter.
Nets sharing a slot overlap in time; nets in different slots are far apart.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import tech
from .layout import (HORIZONTAL, Design, Net, Segment, default_w_max, design_to_dict,
                     extract_coupling_pairs, validate_design)

__all__ = ["GenConfig", "GenError", "generate", "generate_suite", "coupled_fraction", "design_hash"]


class GenError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_layers: int = 4
    n_nets: int = 500
    length_min: float = 60.0
    length_max: float = 200.0
    coupled_fraction: float = 0.7
    bundle_min: int = 2
    bundle_max: int = 4
    spacing_min: float = 0.04
    spacing_max: float = 0.08
    shift_max: float = 0.2
    bend_prob: float = 0.3
    jog_min: float = 30.0
    jog_max: float = 60.0
    s_in_min: float = 10.0
    s_in_max: float = 40.0
    sink_min: float = 1.0
    sink_max: float = 4.0
    cells: tuple = ("INVX1", "INVX2", "INVX4")
    n_slots: int = 2
    slot_pitch: float | None = None
    jitter: float | None = None
    w_max: float | None = None
    name: str | None = None

    def check(self):
        bad = []
        if self.n_nets < 1:
            bad.append("n_nets must be >= 1")
        if not 1 <= self.n_layers:
            bad.append("n_layers must be >= 1")
        for lo, hi in (("length_min", "length_max"), ("spacing_min", "spacing_max"),
                       ("s_in_min", "s_in_max"), ("sink_min", "sink_max"), ("jog_min", "jog_max"),
                       ("bundle_min", "bundle_max")):
            if not getattr(self, lo) < getattr(self, hi) and lo != "bundle_min":
                bad.append(f"{lo} < {hi} required")
        if self.bundle_min < 2 or self.bundle_max < self.bundle_min:
            bad.append("bundle sizes must satisfy 2 <= bundle_min <= bundle_max")
        if not 0.0 <= self.coupled_fraction <= 1.0:
            bad.append("coupled_fraction must lie in [0, 1]")
        if not 0.0 <= self.shift_max < 0.5:
            bad.append("shift_max must lie in [0, 0.5)")
        if self.spacing_min <= 0 or self.length_min <= 0 or self.s_in_min <= 0:
            bad.append("spacing, length and slew minima must be > 0")
        if self.n_slots < 1:
            bad.append("n_slots must be >= 1")
        if self.w_max is not None and self.coupled_fraction > 0 and self.spacing_min > self.w_max:
            bad.append(f"coupled_fraction={self.coupled_fraction} needs spacings <= w_max={self.w_max}, "
                       f"but spacing_min={self.spacing_min}")
        unknown = set(self.cells) - {c.name for c in tech.DRIVER_LIBRARY}
        if unknown:
            bad.append(f"unknown cells {sorted(unknown)}")
        if bad:
            raise GenError("infeasible GenConfig: " + "; ".join(bad))

    @classmethod
    def from_dict(cls, d: dict) -> GenConfig:
        d = dict(d)
        if "cells" in d:
            d["cells"] = tuple(d["cells"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise GenError(f"unknown GenConfig key(s) {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cells"] = list(self.cells)
        return d


def _cells(cfg):
    return [c for c in tech.DRIVER_LIBRARY if c.name in cfg.cells]


def _timing_scale(cfg, layers):
    """(max transition, max RC) over the config's ranges; used for slot spacing."""
    cells = _cells(cfg)
    r_max = max(c.r_drive for c in cells)
    c_per_um = max(l.c_area + 2 * l.c_coup_unit / cfg.spacing_min for l in layers.values())
    r_per_um = max(l.r_sheet / l.M_W / 1000.0 for l in layers.values())
    length = cfg.length_max + 2 * cfg.jog_max
    c_tot = c_per_um * length + cfg.sink_max
    rc = r_max * c_tot + r_per_um * length * (0.5 * c_per_um * length + cfg.sink_max)
    s_out = max(tech.cell_table(c).lookup(cfg.s_in_max, c_tot)[1] for c in cells)
    return max(cfg.s_in_max, s_out), rc


def _shape(cfg, rng, layers, h_layers, v_layers):
    """Template route: list of (layer, start, end) relative to the origin."""
    length = float(rng.uniform(cfg.length_min, cfg.length_max))
    if h_layers and v_layers and rng.random() < cfg.bend_prob:
        h = h_layers[int(rng.integers(len(h_layers)))]
        v = _adjacent(h, v_layers)
        jog = float(rng.uniform(cfg.jog_min, cfg.jog_max))
        a = float(rng.uniform(0.3, 0.7)) * length
        return [(h, (0.0, 0.0), (a, 0.0)), (v, (a, 0.0), (a, jog)), (h, (a, jog), (length, jog))]
    if v_layers and (not h_layers or rng.random() < 0.5):
        v = v_layers[int(rng.integers(len(v_layers)))]
        return [(v, (0.0, 0.0), (0.0, length))]
    h = h_layers[int(rng.integers(len(h_layers)))]
    return [(h, (0.0, 0.0), (length, 0.0))]


def generate(cfg: GenConfig) -> Design:
    """One synthetic design; see the module docstring for the construction."""
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    layers = tech.make_stack(cfg.n_layers)
    h_layers = [l.id for l in layers.values() if l.direction == HORIZONTAL]
    v_layers = [l.id for l in layers.values() if l.direction != HORIZONTAL]
    cells = _cells(cfg)
    max_tr, max_rc = _timing_scale(cfg, layers)
    pitch = cfg.slot_pitch if cfg.slot_pitch is not None else 2.0 * max_tr + 4.0 * max_rc
    jitter = cfg.jitter if cfg.jitter is not None else 0.25 * cfg.s_in_min

    # bundles are added while the coupled share of segments is below target
    groups = []
    n_left = cfg.n_nets
    segs_total = segs_coupled = 0
    while n_left:
        shape = _shape(cfg, rng, layers, h_layers, v_layers)
        k = int(rng.integers(cfg.bundle_min, cfg.bundle_max + 1))
        want = cfg.coupled_fraction * (segs_total + k * len(shape))
        if n_left >= 2 and segs_coupled + 0.5 * k * len(shape) < want:
            k = min(k, n_left)
            segs_coupled += k * len(shape)
        else:
            k = 1
        segs_total += k * len(shape)
        groups.append((k, shape))
        n_left -= k

    tile = cfg.length_max + cfg.jog_max + 10.0
    n_cols = max(1, int(math.ceil(math.sqrt(len(groups)))))
    segments, nets, drivers = {}, {}, {}
    seg_id = net_id = 1
    for gi, (k, template) in enumerate(groups):
        ox = (gi % n_cols) * tile
        oy = (gi // n_cols) * tile
        cell = cells[int(rng.integers(len(cells)))]
        s_in = round(float(rng.uniform(cfg.s_in_min, cfg.s_in_max)), 4)
        sink = round(float(rng.uniform(cfg.sink_min, cfg.sink_max)), 4)
        straight = len(template) == 1
        length = _extent(template)
        off_x = off_y = 0.0
        for copy in range(k):
            if copy:
                gap = float(rng.uniform(cfg.spacing_min, cfg.spacing_max))
                off_y += gap + _width(layers, template, True)
                off_x += gap + _width(layers, template, False)
            shift = float(rng.uniform(-cfg.shift_max, cfg.shift_max)) * length if straight and k > 1 else 0.0
            ids = []
            for layer_id, p0, p1 in template:
                horizontal = p0[1] == p1[1]
                sx, sy = (shift, 0.0) if horizontal else (0.0, shift)
                start = _r(ox + p0[0] + off_x + sx, oy + p0[1] + off_y + sy)
                end = _r(ox + p1[0] + off_x + sx, oy + p1[1] + off_y + sy)
                segments[seg_id] = Segment(seg_id, net_id, layer_id, start, end)
                ids.append(seg_id)
                seg_id += 1
            nets[net_id] = Net(net_id, f"n{net_id}", tuple(ids), sink)
            slot = int(rng.integers(cfg.n_slots))
            at_in = round(slot * pitch + float(rng.uniform(0.0, jitter)), 4)
            direction = "rise" if rng.random() < 0.5 else "fall"
            drivers[net_id] = tech.make_driver(net_id, cell, s_in, direction, at_in)
            net_id += 1
    meta = {"name": cfg.name or f"synth_s{cfg.seed}", "origin": "bench_gen", "seed": cfg.seed,
            "slot_pitch": round(pitch, 4), "jitter": round(jitter, 4)}
    design = Design(layers, nets, segments, drivers, meta)
    validate_design(design)
    if cfg.n_nets >= 20:
        w_max = cfg.w_max if cfg.w_max is not None else default_w_max(design)
        frac = coupled_fraction(design, w_max) if w_max > 0 else 0.0
        # a single bundle moves small designs by more than 10%
        step = cfg.bundle_max * 3 / len(segments)
        if abs(frac - cfg.coupled_fraction) > max(0.1 * max(cfg.coupled_fraction, 0.1), step):
            raise GenError(f"achieved coupled fraction {frac:.3f} misses target {cfg.coupled_fraction}")
    return design


def _extent(template):
    return sum(abs(p1[0] - p0[0]) + abs(p1[1] - p0[1]) for _, p0, p1 in template)


def _r(x, y):
    return (round(x, 6), round(y, 6))


def _adjacent(h, v_layers):
    return min(v_layers, key=lambda v: (abs(v - h), v))


def _width(layers, template, horizontal):
    for layer_id, p0, p1 in template:
        if (p0[1] == p1[1]) == horizontal:
            return layers[layer_id].M_W
    return 0.0


def coupled_fraction(design: Design, w_max: float) -> float:
    pairs = extract_coupling_pairs(design, w_max)
    hit = {p.victim_segment_id for p in pairs} | {p.aggressor_segment_id for p in pairs}
    return len(hit) / max(1, len(design.segments))


def design_hash(design: Design) -> str:
    text = json.dumps(design_to_dict(design), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def generate_suite(base: GenConfig, count: int, seed: int, w_max: float | None = None):
    """``count`` designs with per-design seeds derived from ``seed``; returns (designs, manifest)."""
    if count < 1:
        raise GenError("count must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)
    designs, entries = [], []
    for i, s in enumerate(seeds):
        cfg = replace(base, seed=int(s), name=f"{base.name or 'synth'}_{i:02d}")
        d = generate(cfg)
        wm = w_max if w_max is not None else default_w_max(d)
        pairs = extract_coupling_pairs(d, wm)
        designs.append(d)
        entries.append({"name": d.name, "seed": int(s), "n_nets": len(d.nets),
                        "n_segments": len(d.segments), "n_pairs": len(pairs),
                        "coupled_fraction": round(coupled_fraction(d, wm), 6),
                        "tsi_fraction_window": round(_window_tsi_fraction(d, pairs), 6),
                        "sha256": design_hash(d)})
    manifest = {"base_config": base.to_dict(), "suite_seed": seed, "count": count, "designs": entries}
    return designs, manifest


def _window_tsi_fraction(design, pairs):
    from .timing import classify_pairs_by_window
    if not pairs:
        return 0.0
    cls = classify_pairs_by_window(design, pairs)
    return sum(1 for c in cls.values() if c == "TSI") / len(cls)


def write_suite(designs, manifest, out_dir) -> None:
    from .layout import save_design
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d in designs:
        save_design(d, out / f"{d.name}.json")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

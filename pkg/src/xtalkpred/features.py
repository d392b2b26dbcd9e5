"""Per-segment feature vectors, labeled samples and dataset handling."""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .layout import CouplingPair, Design, coupling_capacitance
from .timing import FSI, TSI, directed_pairs, net_windows

NONE = "NONE"
DSKEW_MAX = 1.0e4
W_MAX_FACTOR = 10.0

FEATURES = ("dskew", "rf", "s_in", "s_out", "d_driver", "m_w", "m_t", "m_h", "m_eps0",
            "wire_len", "l_si", "w_si")
NOSI_FEATURES = ("d_driver", "s_in", "s_out", "wire_len", "m_w", "m_t", "m_h", "m_eps0")
CSV_HEADER = FEATURES + ("label_class", "label_delta", "label_tau_nosi")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    dskew: float
    rf: int
    s_in: float
    s_out: float
    d_driver: float
    m_w: float
    m_t: float
    m_h: float
    m_eps0: float
    wire_len: float
    l_si: float
    w_si: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in FEATURES)


@dataclass(frozen=True)
class Sample:
    features: FeatureVector
    label_class: str = NONE
    label_delta: float = 0.0
    label_tau_nosi: float = 0.0
    design: str = ""
    net_id: int = 0
    segment_id: int = 0
    aggressor_segment_id: int | None = None

    @property
    def key(self):
        return (self.design, self.net_id, self.segment_id)


@dataclass
class Dataset:
    samples: list
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    assignment: list | None = None  # "train" / "test" per sample
    seed: int | None = None

    def __len__(self):
        return len(self.samples)

    def X(self, names=FEATURES, normalized=False) -> np.ndarray:
        cols = [FEATURES.index(n) for n in names]
        X = np.array([s.features.as_tuple() for s in self.samples], dtype=float).reshape(-1, len(FEATURES))
        if normalized:
            if self.mean is None:
                raise FeatureError("dataset has no normalization stats")
            X = (X - self.mean) / self.scale
        return X[:, cols]

    def column(self, name) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def subset(self, part: str) -> Dataset:
        if self.assignment is None:
            raise FeatureError("dataset has not been split")
        keep = [s for s, a in zip(self.samples, self.assignment) if a == part]
        return Dataset(keep, self.mean, self.scale, [part] * len(keep), self.seed)

    def train(self) -> Dataset:
        return self.subset("train")

    def test(self) -> Dataset:
        return self.subset("test")

    def where(self, mask) -> Dataset:
        mask = list(mask)
        keep = [s for s, m in zip(self.samples, mask) if m]
        assign = None if self.assignment is None else [a for a, m in zip(self.assignment, mask) if m]
        return Dataset(keep, self.mean, self.scale, assign, self.seed)

    def digest(self) -> str:
        h = hashlib.sha256()
        for s in self.samples:
            h.update(repr((s.key, s.aggressor_segment_id, s.features.as_tuple(), s.label_class,
                           s.label_delta, s.label_tau_nosi)).encode())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# extraction

def _layer_feats(design, seg):
    layer = design.layers[seg.layer_id]
    return design.seg_width(seg), layer.M_T, layer.M_H, layer.M_eps0


def pair_feature_vector(design: Design, seg_id: int, pair: CouplingPair | None, windows, w_max: float,
                        timing=None) -> FeatureVector:
    """Features of segment ``seg_id`` with ``pair`` as its aggressor (None if uncoupled).

    ``timing`` maps net id to (d_driver, s_out); computed from the windows' table
    lookups when omitted.
    """
    seg = design.segments[seg_id]
    net_id = seg.net_id
    drv = design.drivers[net_id]
    win = windows[net_id]
    d_drv = win.early - drv.at_in
    s_out = win.late - win.early
    m_w, m_t, m_h, eps = _layer_feats(design, seg)
    if pair is None:
        dskew, l_si, w_si = DSKEW_MAX, 0.0, W_MAX_FACTOR * w_max
    else:
        if pair.victim_segment_id != seg_id:
            pair = pair.swapped()
        agg_net = design.segments[pair.aggressor_segment_id].net_id
        dskew = win.early - windows[agg_net].early
        l_si, w_si = pair.L_SI, pair.W_SI
    rf = 1 if drv.direction == "rise" else -1
    return FeatureVector(dskew, rf, drv.s_in, s_out, d_drv, m_w, m_t, m_h, eps, seg.length, l_si, w_si)


def strongest_aggressors(design: Design, pairs) -> dict:
    """Segment id -> its directed pair with the largest coupling capacitance (ties: lower id)."""
    best = {}
    for p in directed_pairs(pairs):
        cc = coupling_capacitance(p, design.layers[design.segments[p.victim_segment_id].layer_id])
        cur = best.get(p.victim_segment_id)
        if cur is None or cc > cur[0] or (cc == cur[0] and p.aggressor_segment_id < cur[1].aggressor_segment_id):
            best[p.victim_segment_id] = (cc, p)
    return {s: p for s, (_, p) in best.items()}


def extract_features(design: Design, pairs, w_max: float, windows=None, oracle=None,
                     threshold: float = 1.0) -> list[Sample]:
    """One sample per segment, paired with its strongest aggressor if it has one.

    With ``oracle`` (an OracleResults) the samples carry labels; features never
    read it.
    """
    if windows is None:
        windows = net_windows(design, pairs)
    for seg in design.segments.values():
        if seg.layer_id not in design.layers:
            raise FeatureError(f"segment {seg.id}: missing layer {seg.layer_id}")
    strongest = strongest_aggressors(design, pairs)
    samples = []
    for net_id in sorted(design.nets):
        for seg_id in design.nets[net_id].segments:
            pair = strongest.get(seg_id)
            fv = pair_feature_vector(design, seg_id, pair, windows, w_max)
            cls, delta, tau = NONE, 0.0, 0.0
            if oracle is not None:
                tau = oracle.nets[net_id].tau_nosi[seg_id]
                if pair is not None:
                    d = oracle.pairs[(pair.victim_segment_id, pair.aggressor_segment_id)].delta
                    cls = TSI if abs(d) > threshold else FSI
                    delta = d if cls == TSI else 0.0
            samples.append(Sample(fv, cls, delta, tau, design.name, net_id, seg_id,
                                  None if pair is None else pair.aggressor_segment_id))
    return samples


def pair_samples(design: Design, pairs, w_max: float, windows=None, oracle=None,
                 threshold: float = 1.0) -> list[Sample]:
    """One sample per directed pair (every aggressor of every coupled segment)."""
    if windows is None:
        windows = net_windows(design, pairs)
    out = []
    for p in directed_pairs(pairs):
        seg = design.segments[p.victim_segment_id]
        fv = pair_feature_vector(design, seg.id, p, windows, w_max)
        cls, delta, tau = NONE, 0.0, 0.0
        if oracle is not None:
            d = oracle.pairs[(p.victim_segment_id, p.aggressor_segment_id)].delta
            cls = TSI if abs(d) > threshold else FSI
            delta = d if cls == TSI else 0.0
            tau = oracle.nets[seg.net_id].tau_nosi[seg.id]
        out.append(Sample(fv, cls, delta, tau, design.name, seg.net_id, seg.id, p.aggressor_segment_id))
    return out


# ---------------------------------------------------------------------------
# normalization and splitting

def normalize(ds: Dataset) -> Dataset:
    """z-score stats from the train split (all samples if unsplit)."""
    train = ds.train() if ds.assignment is not None else ds
    if not len(train):
        raise FeatureError("empty train split")
    X = train.X()
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    flat = scale <= 1e-12 * np.maximum(1.0, np.abs(mean))  # float std of a constant is not exactly 0
    if flat.any():
        names = [FEATURES[i] for i in np.flatnonzero(flat)]
        warnings.warn(f"zero-variance feature(s) {names}: scale set to 1", stacklevel=2)
        scale = np.where(flat, 1.0, scale)
        mean = np.where(flat, X[0], mean)
    return replace(ds, mean=mean, scale=scale)


def denormalize(Xn: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return Xn * scale + mean


def split(ds: Dataset, fraction: float = 0.7, seed: int = 0, by_design: bool = False) -> Dataset:
    """Seeded train/test assignment, stratified on label class (or grouped by design)."""
    if not 0.0 < fraction < 1.0:
        raise FeatureError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(ds.samples)
    assign = ["test"] * n
    if by_design:
        names = sorted({s.design for s in ds.samples})
        order = rng.permutation(len(names))
        n_train = min(len(names) - 1, max(1, int(round(fraction * len(names))))) if len(names) > 1 else 1
        train_names = {names[i] for i in order[:n_train]}
        assign = ["train" if s.design in train_names else "test" for s in ds.samples]
        return replace(ds, assignment=assign, seed=seed)
    classes = sorted({s.label_class for s in ds.samples})
    n_tsi = sum(1 for s in ds.samples if s.label_class == TSI)
    if 0 < n_tsi < 2:
        warnings.warn("too few TSI samples to stratify; plain shuffle", stacklevel=2)
        classes = [None]
    for c in classes:
        idx = [i for i, s in enumerate(ds.samples) if c is None or s.label_class == c]
        idx = [idx[j] for j in rng.permutation(len(idx))]
        for i in idx[:int(round(fraction * len(idx)))]:
            assign[i] = "train"
    return replace(ds, assignment=assign, seed=seed)


def concat(datasets) -> Dataset:
    return Dataset([s for d in datasets for s in d.samples])


# ---------------------------------------------------------------------------
# files

def _fmt(x):
    return repr(float(x)) if not isinstance(x, str) else x


def save_dataset(ds: Dataset, path) -> None:
    """CSV with the fixed header; traceability ids and split go to ``<path>.meta.json``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in ds.samples:
            f = s.features
            w.writerow([_fmt(getattr(f, n)) if n != "rf" else str(f.rf) for n in FEATURES]
                       + [s.label_class, _fmt(s.label_delta), _fmt(s.label_tau_nosi)])
    meta = {"trace": [[s.design, s.net_id, s.segment_id, s.aggressor_segment_id] for s in ds.samples],
            "assignment": ds.assignment, "seed": ds.seed}
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise FeatureError(f"{path}: header must be {','.join(CSV_HEADER)}")
    try:
        with open(f"{path}.meta.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        meta = {"trace": [["", 0, i + 1, None] for i in range(len(rows) - 1)], "assignment": None, "seed": None}
    samples = []
    for line, (row, tr) in enumerate(zip(rows[1:], meta["trace"]), start=2):
        if len(row) != len(CSV_HEADER):
            raise FeatureError(f"{path}: line {line}: expected {len(CSV_HEADER)} fields")
        try:
            vals = [float(v) for v in row[:len(FEATURES)]]
            vals[1] = int(vals[1])
            fv = FeatureVector(*vals)
            cls = row[len(FEATURES)]
            if cls not in (TSI, FSI, NONE):
                raise ValueError(f"bad label_class {cls!r}")
            samples.append(Sample(fv, cls, float(row[-2]), float(row[-1]), tr[0], int(tr[1]), int(tr[2]),
                                  None if tr[3] is None else int(tr[3])))
        except ValueError as exc:
            raise FeatureError(f"{path}: line {line}: {exc}") from None
    return Dataset(samples, assignment=meta.get("assignment"), seed=meta.get("seed"))

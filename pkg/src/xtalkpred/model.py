"""Two-step delay model: crosstalk filter, delta-delay regressor, quiet-delay regressor.

Step one classifies each (segment, aggressor) sample as effective or not.
Step two predicts the delta delay of the effective ones. A third regressor
predicts each segment's delay without crosstalk, so a stage estimate needs no
simulation at inference time.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .features import FEATURES, NOSI_FEATURES, Dataset, FeatureVector
from .timing import TSI
from .trees import BoostedRegressor, ForestClassifier

FORMAT = "xtalkpred-model"
FORMAT_VERSION = 1
MIN_REGRESSION_SAMPLES = 100
GOLDEN_FLOOR = 1.0  # ps; accuracy ratio ignores smaller golden values


class ModelError(ValueError):
    pass


class ModelFormatError(ModelError):
    pass


@dataclass
class ModelConfig:
    seed: int = 0
    classifier: dict = field(default_factory=lambda: {"n_trees": 100, "max_depth": 12, "max_features": "sqrt"})
    regressor: dict = field(default_factory=lambda: {"n_trees": 300, "learning_rate": 0.1, "max_leaves": 31})
    grid: bool = False

    def to_dict(self) -> dict:
        return {"seed": self.seed, "classifier": dict(self.classifier), "regressor": dict(self.regressor),
                "grid": self.grid}


CLASSIFIER_GRID = {"n_trees": (50, 100, 200), "max_depth": (8, 12, 16)}
REGRESSOR_GRID = {"learning_rate": (0.05, 0.1, 0.2), "max_leaves": (15, 31, 63)}


@dataclass
class EvalMetrics:
    r2: float = float("nan")
    accuracy_ratio: float = float("nan")
    accuracy: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    n: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# metrics

def r2_score(golden, pred) -> float:
    golden = np.asarray(golden, dtype=float)
    pred = np.asarray(pred, dtype=float)
    ss_tot = float(((golden - golden.mean()) ** 2).sum())
    ss_res = float(((golden - pred) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def accuracy_ratio(golden, pred, floor: float = GOLDEN_FLOOR) -> float:
    golden = np.asarray(golden, dtype=float)
    keep = golden > floor
    if not keep.any():
        return float("nan")
    return float(np.mean(np.asarray(pred, dtype=float)[keep] / golden[keep]))


def classification_metrics(truth, pred, m: EvalMetrics | None = None) -> EvalMetrics:
    truth = np.asarray(truth, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    m = m or EvalMetrics()
    m.tp = int(np.sum(truth & pred))
    m.fp = int(np.sum(~truth & pred))
    m.tn = int(np.sum(~truth & ~pred))
    m.fn = int(np.sum(truth & ~pred))
    m.n = len(truth)
    m.accuracy = (m.tp + m.tn) / m.n if m.n else float("nan")
    m.precision = m.tp / (m.tp + m.fp) if m.tp + m.fp else float("nan")
    m.recall = m.tp / (m.tp + m.fn) if m.tp + m.fn else float("nan")
    return m


# ---------------------------------------------------------------------------
# training

def _canonical(ds: Dataset) -> Dataset:
    """Samples sorted by traceability ids, so training ignores input order."""
    order = sorted(range(len(ds.samples)),
                   key=lambda i: (ds.samples[i].key, ds.samples[i].aggressor_segment_id or 0))
    assign = None if ds.assignment is None else [ds.assignment[i] for i in order]
    return replace(ds, samples=[ds.samples[i] for i in order], assignment=assign)


def _require_split(ds: Dataset):
    if ds.assignment is None:
        raise ModelError("dataset must be split before training")
    if ds.mean is None:
        raise ModelError("dataset must be normalized before training")


def _is_tsi(ds: Dataset) -> np.ndarray:
    return np.array([s.label_class == TSI for s in ds.samples], dtype=bool)


def _fit_classifier(X, y, params, seed):
    return ForestClassifier(**params, seed=seed).fit(X, y.astype(float))


def _fit_regressor(X, y, params, seed):
    if np.ptp(y) == 0.0:
        m = BoostedRegressor(**params, seed=seed)
        m.base = float(y[0])
        return m
    return BoostedRegressor(**params, seed=seed).fit(X, y)


def _grid_pick(fit, score, X, y, base, grid, seed):
    """Best grid point on a seeded 80/20 hold-out of the training rows."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(y))
    cut = int(0.8 * len(y))
    tr, va = idx[:cut], idx[cut:]
    (k1, v1), (k2, v2) = grid.items()
    best = None
    for a in v1:
        for b in v2:
            params = dict(base, **{k1: a, k2: b})
            try:
                s = score(fit(X[tr], y[tr], params, seed), X[va], y[va])
            except ValueError:
                continue
            if best is None or s > best[0]:
                best = (s, params)
    return base if best is None else best[1]


def train_classifier(ds: Dataset, cfg: ModelConfig | None = None):
    """Forest on coupled train samples (TSI vs rest); metrics on coupled test samples."""
    cfg = cfg or ModelConfig()
    _require_split(ds)
    ds = _canonical(ds)
    coupled = ds.where([s.label_class != "NONE" for s in ds.samples])
    tr, te = coupled.train(), coupled.test()
    y = _is_tsi(tr)
    if len(np.unique(y)) < 2:
        raise ModelError("classifier train split holds a single class")
    X = tr.X(normalized=True)
    params = dict(cfg.classifier)
    if cfg.grid:
        params = _grid_pick(_fit_classifier, lambda m, Xv, yv: float(np.mean(m.predict(Xv) == yv)),
                            X, y, params, CLASSIFIER_GRID, cfg.seed)
    model = _fit_classifier(X, y, params, cfg.seed)
    metrics = EvalMetrics()
    if len(te):
        classification_metrics(_is_tsi(te), model.predict(te.X(normalized=True)) == 1, metrics)
    return model, metrics


def _train_reg(ds, cfg, target, names, rows=None):
    cfg = cfg or ModelConfig()
    _require_split(ds)
    ds = _canonical(ds)
    if rows is not None:
        ds = ds.where(rows(ds))
    tr, te = ds.train(), ds.test()
    if len(tr) < MIN_REGRESSION_SAMPLES:
        raise ModelError(f"need >= {MIN_REGRESSION_SAMPLES} training samples, got {len(tr)}")
    cols = [FEATURES.index(n) for n in names]
    X = tr.X(normalized=True)[:, cols]
    y = target(tr)
    params = dict(cfg.regressor)
    if np.ptp(y) == 0.0:
        warnings.warn("constant regression target: model predicts the constant, R^2 reported as 1",
                      stacklevel=3)
        model = _fit_regressor(X, y, params, cfg.seed)
        return model, EvalMetrics(r2=1.0, n=len(te))
    if cfg.grid:
        params = _grid_pick(_fit_regressor, lambda m, Xv, yv: r2_score(yv, m.predict(Xv)),
                            X, y, params, REGRESSOR_GRID, cfg.seed)
    model = _fit_regressor(X, y, params, cfg.seed)
    metrics = EvalMetrics(n=len(te))
    if len(te):
        yt = target(te)
        pt = model.predict(te.X(normalized=True)[:, cols])
        metrics.r2 = r2_score(yt, pt)
        metrics.accuracy_ratio = accuracy_ratio(yt, pt)
    return model, metrics


def _delta(ds):
    return ds.column("label_delta")


def _tau(ds):
    return ds.column("label_tau_nosi")


def _total(ds):
    return ds.column("label_tau_nosi") + ds.column("label_delta")


def train_regressor(ds: Dataset, cfg: ModelConfig | None = None):
    """Delta-delay regressor on TSI samples."""
    return _train_reg(ds, cfg, _delta, FEATURES, lambda d: _is_tsi(d))


def train_nosi(ds: Dataset, cfg: ModelConfig | None = None):
    """Quiet segment-delay regressor on every sample, driver/wire features only."""
    return _train_reg(ds, cfg, _tau, NOSI_FEATURES)


def train_onestep_baseline(ds: Dataset, cfg: ModelConfig | None = None):
    """Single regressor for the total segment delay, no filtering."""
    return _train_reg(ds, cfg, _total, FEATURES)


# ---------------------------------------------------------------------------
# the combined model

@dataclass
class TwoStepModel:
    classifier: ForestClassifier
    regressor: BoostedRegressor
    nosi_regressor: BoostedRegressor
    mean: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    def _norm(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(FEATURES):
            raise ModelError(f"expected {len(FEATURES)} features, got {X.shape[1]}")
        return (X - self.mean) / self.scale

    def classify(self, X) -> np.ndarray:
        """True where the sample is predicted TSI."""
        Xn = self._norm(X)
        out = np.zeros(len(Xn), dtype=bool)
        coupled = np.asarray(X, dtype=float).reshape(len(Xn), -1)[:, FEATURES.index("l_si")] > 0
        if coupled.any():
            out[coupled] = self.classifier.predict(Xn[coupled]) == 1
        return out

    def predict_delta(self, X) -> np.ndarray:
        return self.regressor.predict(self._norm(X))

    def predict_tau_nosi(self, X) -> np.ndarray:
        cols = [FEATURES.index(n) for n in NOSI_FEATURES]
        return self.nosi_regressor.predict(self._norm(X)[:, cols])

    def feature_importance(self) -> dict:
        """Split-count share per feature for each learner; reported, never used for decisions."""
        nosi = dict(zip(NOSI_FEATURES, self.nosi_regressor.ensemble.split_share(len(NOSI_FEATURES)).tolist()))
        return {"classifier": dict(zip(FEATURES, self.classifier.ensemble.split_share(len(FEATURES)).tolist())),
                "regressor": dict(zip(FEATURES, self.regressor.ensemble.split_share(len(FEATURES)).tolist())),
                "nosi": nosi}

    def predict_segments(self, X):
        """(tsi mask, delta where TSI else 0, quiet delay) per sample row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        tsi = self.classify(X)
        delta = np.zeros(len(X))
        if tsi.any():
            delta[tsi] = self.predict_delta(X[tsi])
        return tsi, delta, self.predict_tau_nosi(X)


def train_two_step(ds: Dataset, cfg: ModelConfig | None = None):
    """All three learners; returns (model, {"classifier", "regressor", "nosi"} metrics)."""
    cfg = cfg or ModelConfig()
    clf, m_c = train_classifier(ds, cfg)
    reg, m_r = train_regressor(ds, cfg)
    nosi, m_n = train_nosi(ds, cfg)
    meta = {"seed": cfg.seed,
            "config": cfg.to_dict(), "dataset_sha256": ds.digest(), "n_samples": len(ds)}
    model = TwoStepModel(clf, reg, nosi, np.asarray(ds.mean), np.asarray(ds.scale), meta)
    return model, {"classifier": m_c, "regressor": m_r, "nosi": m_n}


@dataclass(frozen=True)
class StagePrediction:
    d_driver: float
    tau_nosi: dict  # segment id -> ps
    delta: dict  # segment id -> ps, only segments with at least one TSI aggressor
    d_net: float
    d_stage: float
    tsi_pairs: tuple = ()  # (segment id, aggressor segment id) predicted TSI
    fsi_pairs: tuple = ()
    pair_delta: dict = field(default_factory=dict)  # TSI pair -> predicted delta


@dataclass(frozen=True)
class SegmentInput:
    segment_id: int
    features: FeatureVector  # quiet-delay features (its own or strongest-aggressor sample)
    aggressors: tuple = ()  # ((aggressor segment id, FeatureVector), ...)


def predict_stage(segments, model: TwoStepModel, d_driver: float | None = None) -> StagePrediction:
    """Stage delay = driver delay + sum of quiet segment delays + deltas of TSI pairs.

    Pairs classified FSI add nothing. ``d_driver`` defaults to the table delay
    carried in the features.
    """
    segments = list(segments)
    if d_driver is None:
        if not segments:
            raise ModelError("empty net needs an explicit d_driver")
        d_driver = segments[0].features.d_driver
    if not segments:
        return StagePrediction(float(d_driver), {}, {}, 0.0, float(d_driver))
    X = np.array([s.features.as_tuple() for s in segments])
    taus = model.predict_tau_nosi(X)
    rows, owner = [], []
    for i, s in enumerate(segments):
        for agg_id, fv in s.aggressors:
            rows.append(fv.as_tuple())
            owner.append((i, agg_id))
    delta, pair_delta = {}, {}
    tsi_pairs, fsi_pairs = [], []
    if rows:
        tsi, d, _ = model.predict_segments(np.array(rows))
        for (i, agg_id), hit, dv in zip(owner, tsi, d):
            sid = segments[i].segment_id
            if hit:
                delta[sid] = delta.get(sid, 0.0) + float(dv)
                pair_delta[(sid, agg_id)] = float(dv)
                tsi_pairs.append((sid, agg_id))
            else:
                fsi_pairs.append((sid, agg_id))
    tau = {s.segment_id: float(t) for s, t in zip(segments, taus)}
    from .sta import net_delay
    d_net = net_delay([tau[s.segment_id] for s in segments],
                      {i: delta[s.segment_id] for i, s in enumerate(segments) if s.segment_id in delta})
    return StagePrediction(float(d_driver), tau, delta, d_net, float(d_driver) + d_net,
                           tuple(tsi_pairs), tuple(fsi_pairs), pair_delta)


def evaluate(model: TwoStepModel, ds: Dataset) -> EvalMetrics:
    """Sample-level metrics: total segment delay R^2 and ratio, plus TSI classification."""
    if not len(ds):
        raise ModelError("empty evaluation set")
    X = ds.X()
    tsi, delta, tau = model.predict_segments(X)
    pred = tau + delta
    golden = _total(ds)
    m = EvalMetrics(r2=r2_score(golden, pred), accuracy_ratio=accuracy_ratio(golden, pred))
    coupled = np.array([s.label_class != "NONE" for s in ds.samples])
    if coupled.any():
        cm = classification_metrics(_is_tsi(ds)[coupled], tsi[coupled])
        m.accuracy, m.precision, m.recall = cm.accuracy, cm.precision, cm.recall
        m.tp, m.fp, m.tn, m.fn = cm.tp, cm.fp, cm.tn, cm.fn
    m.n = len(ds)
    return m


def evaluate_onestep(model: BoostedRegressor, mean, scale, ds: Dataset) -> EvalMetrics:
    pred = model.predict((ds.X() - mean) / scale)
    golden = _total(ds)
    return EvalMetrics(r2=r2_score(golden, pred), accuracy_ratio=accuracy_ratio(golden, pred), n=len(ds))


# ---------------------------------------------------------------------------
# persistence

def _payload(model: TwoStepModel) -> dict:
    return {"features": list(FEATURES), "nosi_features": list(NOSI_FEATURES),
            "classifier": model.classifier.to_dict(), "regressor": model.regressor.to_dict(),
            "nosi_regressor": model.nosi_regressor.to_dict(),
            "mean": model.mean.tolist(), "scale": model.scale.tolist(), "meta": model.meta}


def _checksum(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_model(model: TwoStepModel, path) -> None:
    payload = _payload(model)
    doc = {"format": FORMAT, "version": FORMAT_VERSION, "sha256": _checksum(payload), "payload": payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TwoStepModel:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        raise ModelFormatError(f"{path}: checksum failure (file is not a complete model document)") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {doc.get('version')} != {FORMAT_VERSION}")
    payload = doc.get("payload")
    if payload is None or _checksum(payload) != doc.get("sha256"):
        raise ModelFormatError(f"{path}: checksum failure")
    if tuple(payload["features"]) != FEATURES:
        raise ModelFormatError(f"{path}: feature list differs from this build")
    return TwoStepModel(ForestClassifier.from_dict(payload["classifier"]),
                        BoostedRegressor.from_dict(payload["regressor"]),
                        BoostedRegressor.from_dict(payload["nosi_regressor"]),
                        np.array(payload["mean"], dtype=float), np.array(payload["scale"], dtype=float),
                        payload["meta"])

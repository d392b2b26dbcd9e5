"""Histogram tree ensembles: a bagged classification forest and gradient-boosted regression trees.

Features are binned once per fit. Every bin boundary is an observed training
value and a split sends ``x <= threshold`` left, so a fitted ensemble is
unchanged by any strictly increasing rescaling of a feature applied to both
training and prediction inputs.

Both learners score splits by the weighted squared-sum criterion
``S_L^2 / W_L + S_R^2 / W_R``. For 0/1 targets this is exactly half the Gini
impurity decrease, and for residuals it is the variance reduction.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from . import kernels

MAX_BINS = 255


class Binner:
    """Per-feature upper bin edges taken from the training values."""

    def __init__(self, max_bins: int = MAX_BINS):
        if not 2 <= max_bins <= 256:
            raise ValueError("max_bins must lie in [2, 256]")
        self.max_bins = max_bins
        self.edges: list[np.ndarray] = []

    def fit(self, X: np.ndarray) -> Binner:
        self.edges = []
        for col in np.asarray(X, dtype=float).T:
            uniq = np.unique(col)
            if len(uniq) <= self.max_bins:
                edges = uniq
            else:
                srt = np.sort(col)
                ranks = (np.arange(1, self.max_bins) * len(srt)) // self.max_bins - 1
                edges = np.unique(np.append(srt[ranks], srt[-1]))
            self.edges.append(edges)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape, dtype=np.uint8)
        for j, edges in enumerate(self.edges):
            out[:, j] = np.minimum(np.searchsorted(edges, X[:, j], side="left"), len(edges) - 1)
        return out


def _best_split(hs, hw, total_s, total_w, min_w):
    """(gain, feature row, bin) of the best split over histogram rows, or None."""
    sl = np.cumsum(hs, axis=1)[:, :-1]
    wl = np.cumsum(hw, axis=1)[:, :-1]
    sr = total_s - sl
    wr = total_w - wl
    ok = (wl >= min_w) & (wr >= min_w)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(ok, sl * sl / wl + sr * sr / wr, -np.inf)
    flat = int(np.argmax(score))
    f, b = divmod(flat, score.shape[1])
    gain = score[f, b] - total_s * total_s / total_w
    if not gain > 1e-12 * max(1.0, abs(total_s * total_s / total_w)):
        return None
    return gain, f, b


class _TreeBuf:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right


class Ensemble:
    """Flat storage of many trees; child indices are relative to the tree root."""

    def __init__(self):
        self.feature = np.zeros(0, dtype=np.int32)
        self.threshold = np.zeros(0)
        self.left = np.zeros(0, dtype=np.int32)
        self.right = np.zeros(0, dtype=np.int32)
        self.value = np.zeros(0)
        self.roots = np.zeros(0, dtype=np.int64)

    @classmethod
    def from_buffers(cls, bufs) -> Ensemble:
        e = cls()
        sizes = [len(b.value) for b in bufs]
        e.roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if bufs else e.roots
        e.feature = np.array([x for b in bufs for x in b.feature], dtype=np.int32)
        e.threshold = np.array([x for b in bufs for x in b.threshold], dtype=float)
        e.left = np.array([x for b in bufs for x in b.left], dtype=np.int32)
        e.right = np.array([x for b in bufs for x in b.right], dtype=np.int32)
        e.value = np.array([x for b in bufs for x in b.value], dtype=float)
        return e

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def predict_sum(self, X) -> np.ndarray:
        return kernels.ensemble_predict(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                                        self.left, self.right, self.value, self.roots, 0.0, False)

    def count_votes(self, X, threshold: float) -> np.ndarray:
        return kernels.ensemble_predict(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                                        self.left, self.right, self.value, self.roots, threshold, True)

    def split_share(self, n_features: int) -> np.ndarray:
        """Fraction of all internal nodes that split on each feature."""
        used = self.feature[self.feature >= 0]
        counts = np.bincount(used, minlength=n_features).astype(float)
        return counts / counts.sum() if counts.sum() else counts

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "roots": self.roots.tolist()}

    @classmethod
    def from_dict(cls, d) -> Ensemble:
        e = cls()
        e.feature = np.array(d["feature"], dtype=np.int32)
        e.threshold = np.array(d["threshold"], dtype=float)
        e.left = np.array(d["left"], dtype=np.int32)
        e.right = np.array(d["right"], dtype=np.int32)
        e.value = np.array(d["value"], dtype=float)
        e.roots = np.array(d["roots"], dtype=np.int64)
        return e


def _n_features(max_features, d):
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(d))))
    if max_features is None or max_features == "all":
        return d
    if isinstance(max_features, float):
        return max(1, int(round(max_features * d)))
    return max(1, min(d, int(max_features)))


def _grow_depthwise(binned, edges, y, w, rows, max_depth, min_leaf, n_feat, rng):
    """Bagging tree: depth-first growth, fresh feature subset at every node.

    ``w`` holds bootstrap counts, so the leaf-size limit counts draws.
    """
    d = binned.shape[1]
    buf = _TreeBuf()
    yw = y * w
    stack = [(buf.add(0.0), rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        total_w = w[idx].sum()
        total_s = yw[idx].sum()
        buf.value[node] = total_s / total_w
        if depth >= max_depth or total_s == 0.0 or total_s == total_w or total_w < 2 * min_leaf:
            continue
        feats = np.sort(rng.choice(d, size=n_feat, replace=False)).astype(np.intp)
        hs, hw = kernels.build_histograms(binned, idx, feats, yw, w, MAX_BINS + 1)
        best = _best_split(hs, hw, total_s, total_w, min_leaf)
        if best is None:
            continue
        _, fi, b = best
        f = int(feats[fi])
        go_left = binned[idx, f] <= b
        left, right = buf.add(0.0), buf.add(0.0)
        buf.split(node, f, edges[f][b], left, right)
        stack.append((right, idx[~go_left], depth + 1))
        stack.append((left, idx[go_left], depth + 1))
    return buf


class ForestClassifier:
    """Bagged classification trees with hard voting; positive class is 1."""

    def __init__(self, n_trees=100, max_depth=12, max_features="sqrt", min_samples_leaf=1,
                 vote_threshold=0.5, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.vote_threshold = vote_threshold
        self.seed = seed
        self.ensemble = Ensemble()

    def params(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "max_features": self.max_features,
                "min_samples_leaf": self.min_samples_leaf, "vote_threshold": self.vote_threshold,
                "seed": self.seed}

    def fit(self, X, y) -> ForestClassifier:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if set(np.unique(y)) - {0.0, 1.0}:
            raise ValueError("targets must be 0/1")
        if len(np.unique(y)) < 2:
            raise ValueError("training data holds a single class")
        binner = Binner().fit(X)
        binned = binner.transform(X)
        n, d = X.shape
        n_feat = _n_features(self.max_features, d)
        bufs = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
            rows = np.flatnonzero(w > 0).astype(np.intp)
            bufs.append(_grow_depthwise(binned, binner.edges, y, w, rows, self.max_depth,
                                        self.min_samples_leaf, n_feat, rng))
        self.ensemble = Ensemble.from_buffers(bufs)
        return self

    def vote_fraction(self, X) -> np.ndarray:
        """Share of trees whose leaf majority is positive (a 50/50 leaf votes positive)."""
        return self.ensemble.count_votes(X, 0.5) / max(1, self.ensemble.n_trees)

    def predict(self, X) -> np.ndarray:
        return (self.vote_fraction(X) >= self.vote_threshold).astype(int)

    def to_dict(self) -> dict:
        return {"params": self.params(), "ensemble": self.ensemble.to_dict()}

    @classmethod
    def from_dict(cls, d) -> ForestClassifier:
        m = cls(**d["params"])
        m.ensemble = Ensemble.from_dict(d["ensemble"])
        return m


class BoostedRegressor:
    """Squared-loss gradient boosting with leaf-wise trees; prediction = base + sum of trees."""

    def __init__(self, n_trees=300, learning_rate=0.1, max_leaves=31, min_samples_leaf=20,
                 subsample=1.0, seed=0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.min_samples_leaf = min_samples_leaf
        self.subsample = subsample
        self.seed = seed
        self.base = 0.0
        self.ensemble = Ensemble()

    def params(self) -> dict:
        return {"n_trees": self.n_trees, "learning_rate": self.learning_rate, "max_leaves": self.max_leaves,
                "min_samples_leaf": self.min_samples_leaf, "subsample": self.subsample, "seed": self.seed}

    def fit(self, X, y) -> BoostedRegressor:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not len(y):
            raise ValueError("empty training data")
        binner = Binner().fit(X)
        binned = binner.transform(X)
        n, d = X.shape
        self.base = float(y.mean())
        pred = np.full(n, self.base)
        ones = np.ones(n)
        feats = np.arange(d, dtype=np.intp)
        rng = np.random.default_rng(self.seed)
        bufs = []
        for _ in range(self.n_trees):
            resid = y - pred
            if self.subsample < 1.0:
                rows = np.sort(rng.choice(n, size=max(1, int(self.subsample * n)), replace=False)).astype(np.intp)
            else:
                rows = np.arange(n, dtype=np.intp)
            buf = self._grow(binned, binner.edges, resid, ones, rows, feats)
            vals = np.asarray(buf.value)
            pred += vals[_route(buf, X)]
            bufs.append(buf)
            if not np.any(vals):
                break
        self.ensemble = Ensemble.from_buffers(bufs)
        return self

    def _grow(self, binned, edges, resid, ones, rows, feats):
        buf = _TreeBuf()
        min_w = self.min_samples_leaf
        lr = self.learning_rate

        def candidate(node, idx, hist):
            hs, hw = hist
            s, w = resid[idx].sum(), float(len(idx))
            best = _best_split(hs, hw, s, w, min_w) if len(idx) >= 2 * min_w else None
            return (node, idx, hist, s, w, best)

        root = buf.add(lr * resid[rows].mean())
        heap = []
        counter = 0
        c = candidate(root, rows, kernels.build_histograms(binned, rows, feats, resid, ones, MAX_BINS + 1))
        if c[5] is not None:
            heapq.heappush(heap, (-c[5][0], counter, c))
        n_leaves = 1
        while heap and n_leaves < self.max_leaves:
            _, _, (node, idx, (hs, hw), s, w, (gain, f, b)) = heapq.heappop(heap)
            go_left = binned[idx, f] <= b
            li, ri = idx[go_left], idx[~go_left]
            small, big = (li, ri) if len(li) <= len(ri) else (ri, li)
            h_small = kernels.build_histograms(binned, small, feats, resid, ones, MAX_BINS + 1)
            h_big = (hs - h_small[0], hw - h_small[1])
            hl, hr = (h_small, h_big) if small is li else (h_big, h_small)
            left = buf.add(lr * resid[li].mean())
            right = buf.add(lr * resid[ri].mean())
            buf.split(node, f, edges[f][b], left, right)
            n_leaves += 1
            for child, cidx, hist in ((left, li, hl), (right, ri, hr)):
                c = candidate(child, cidx, hist)
                if c[5] is not None:
                    counter += 1
                    heapq.heappush(heap, (-c[5][0], counter, c))
        for node in range(len(buf.value)):
            if buf.feature[node] >= 0:
                buf.value[node] = 0.0
        return buf

    def predict(self, X) -> np.ndarray:
        return self.base + self.ensemble.predict_sum(X)

    def to_dict(self) -> dict:
        return {"params": self.params(), "base": self.base, "ensemble": self.ensemble.to_dict()}

    @classmethod
    def from_dict(cls, d) -> BoostedRegressor:
        m = cls(**d["params"])
        m.base = float(d["base"])
        m.ensemble = Ensemble.from_dict(d["ensemble"])
        return m


def _route(buf, X):
    """Leaf index of every row of X in a single tree buffer."""
    feature = np.asarray(buf.feature)
    threshold = np.asarray(buf.threshold)
    left = np.asarray(buf.left)
    right = np.asarray(buf.right)
    node = np.zeros(len(X), dtype=np.int64)
    rows = np.arange(len(X))
    active = feature[node] >= 0
    while active.any():
        nd = node[active]
        go = X[rows[active], feature[nd]] <= threshold[nd]
        node[active] = np.where(go, left[nd], right[nd])
        active = feature[node] >= 0
    return node

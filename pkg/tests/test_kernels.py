import numpy as np
import pytest

from xtalkpred import kernels
from xtalkpred.oracle import build_network, default_dt, modal_unit_responses, unit_responses
from xtalkpred.tech import two_net_config
from xtalkpred.trees import BoostedRegressor, ForestClassifier


def _network():
    cfg = two_net_config()
    d = cfg.design
    net = build_network(d.nets[1], [d.nets[2]], cfg.pairs, d)
    return net, default_dt(net), [net.taps[1].sink, net.taps[2].sink]


def _data(n=600, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 6))
    y = 2 * X[:, 0] - X[:, 1] ** 2 + 0.1 * rng.normal(size=n)
    return X, y


def _run(fn):
    out = {}
    for b in ("python", "cython"):
        try:
            prev = kernels.use(b)
        except ImportError:
            pytest.skip("compiled extension not built")
        try:
            out[b] = fn()
        finally:
            kernels.use(prev)
    return out["python"], out["cython"]


def test_transient_kernel_backends_agree():
    net, dt, probes = _network()
    py, cy = _run(lambda: unit_responses(net, dt, 200.0, probes)[1])
    assert np.allclose(py, cy, rtol=0, atol=1e-12)


def test_modal_kernel_backends_agree():
    net, dt, probes = _network()
    py, cy = _run(lambda: modal_unit_responses(net, dt, 200.0, probes)[1])
    assert np.allclose(py, cy, rtol=0, atol=1e-12)


def test_tree_kernels_backends_agree():
    X, y = _data()

    def fit():
        reg = BoostedRegressor(n_trees=40, seed=1).fit(X, y)
        clf = ForestClassifier(n_trees=15, max_depth=6, seed=1).fit(X, (y > 0).astype(int))
        return reg.predict(X), clf.vote_fraction(X)

    (rp, vp), (rc, vc) = _run(fit)
    assert np.allclose(rp, rc, rtol=0, atol=1e-9)
    assert np.array_equal(vp, vc)


def test_backend_switch_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use("fortran")

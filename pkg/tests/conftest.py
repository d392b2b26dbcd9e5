
import numpy as np
import pytest

from xtalkpred import kernels
from xtalkpred.layout import HORIZONTAL, Design, Net, Segment
from xtalkpred.tech import DRIVER_LIBRARY, make_driver, make_stack


def line_design(specs, n_layers=2, cell=DRIVER_LIBRARY[1], s_in=20.0, sink_cap=2.0, at_in=100.0):
    """Design with one single-segment net per spec ``(layer, start, end)``; net i owns segment i (1-based)."""
    layers = make_stack(n_layers)
    segs, nets, drivers = {}, {}, {}
    for i, (layer, start, end) in enumerate(specs, start=1):
        segs[i] = Segment(i, i, layer, tuple(map(float, start)), tuple(map(float, end)))
        nets[i] = Net(i, f"n{i}", (i,), sink_cap)
        drivers[i] = make_driver(i, cell, s_in, "rise" if i % 2 else "fall", at_in)
    return Design(layers, nets, segs, drivers, {"name": "lines"})


def random_design(rng, n_segments, n_layers=2, extent=60.0, max_len=30.0):
    """Random axis-aligned single-segment nets on a small grid (for extraction checks)."""
    specs = []
    layers = make_stack(n_layers)
    for _ in range(n_segments):
        layer = int(rng.integers(1, n_layers + 1))
        pitch = layers[layer].M_W + 0.02 * int(rng.integers(1, 6))
        track = pitch * int(rng.integers(0, 40))
        a = float(np.round(rng.uniform(0, extent), 2))
        b = float(np.round(a + rng.uniform(0.5, max_len), 2))
        if layers[layer].direction == HORIZONTAL:
            specs.append((layer, (a, track), (b, track)))
        else:
            specs.append((layer, (track, a), (track, b)))
    return line_design(specs, n_layers)


@pytest.fixture(params=["cython", "python"])
def backend(request):
    if request.param == "cython":
        try:
            kernels.get("be_integrate", "cython")
        except ImportError:
            pytest.skip("compiled extension not built")
    prev = kernels.use(request.param)
    yield request.param
    kernels.use(prev)




@pytest.fixture(scope="session")
def small_suite():
    """Four oracle-labeled designs of 120 nets: [(design, w_max, pairs, results), ...]."""
    from xtalkpred.bench_gen import GenConfig, generate_suite
    from xtalkpred.labeling import label_design
    from xtalkpred.layout import default_w_max, extract_coupling_pairs

    designs, _ = generate_suite(GenConfig(n_nets=120), 4, seed=99)
    out = []
    for d in designs:
        wm = default_w_max(d)
        pairs = extract_coupling_pairs(d, wm)
        out.append((d, wm, pairs, label_design(d, pairs)))
    return out


@pytest.fixture(scope="session")
def small_dataset(small_suite):
    """Segment samples of ``small_suite``, split by design and normalized."""
    from xtalkpred.features import Dataset, extract_features, normalize, split

    samples = [s for d, wm, pairs, res in small_suite for s in extract_features(d, pairs, wm, oracle=res)]
    return normalize(split(Dataset(samples), 0.7, seed=0, by_design=True))


FAST = {"classifier": {"n_trees": 20, "max_depth": 10, "max_features": "sqrt"},
        "regressor": {"n_trees": 60, "learning_rate": 0.15, "max_leaves": 15}}


@pytest.fixture(scope="session")
def small_model(small_dataset):
    from xtalkpred.model import ModelConfig, train_two_step

    return train_two_step(small_dataset, ModelConfig(seed=0, **FAST))[0]

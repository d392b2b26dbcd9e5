"""Time the compiled kernels against the numpy fallback on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each workload runs once per backend after a warm-up; results must agree.
"""

import argparse
import time

import numpy as np

from xtalkpred import kernels
from xtalkpred.bench_gen import GenConfig, generate
from xtalkpred.labeling import label_design
from xtalkpred.layout import default_w_max, extract_coupling_pairs
from xtalkpred.oracle import build_network, simulate_transient
from xtalkpred.tech import two_net_design
from xtalkpred.trees import BoostedRegressor, ForestClassifier


def _workloads():
    pair_design = two_net_design()
    pair_pairs = extract_coupling_pairs(pair_design, 0.15)
    pair_net = build_network(pair_design.nets[1], [pair_design.nets[2]], pair_pairs, pair_design, 16)
    design = generate(GenConfig(seed=3, n_nets=120))
    wm = default_w_max(design)
    pairs = extract_coupling_pairs(design, wm)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8000, 12))
    y_cls = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    y_reg = np.sin(X[:, 0]) + X[:, 1] * X[:, 2]
    forest = ForestClassifier(n_trees=50, seed=0).fit(X, y_cls)
    return {
        "transient (sparse BE, two-net pair, 16 sections)": lambda: simulate_transient(pair_net).v,
        "labeling (modal BE, 120-net design)": lambda: np.array(
            sorted(r.delta for r in label_design(design, pairs).pairs.values())),
        "forest fit (50 trees, 8000x12)": lambda: ForestClassifier(n_trees=50, seed=0).fit(X, y_cls).predict(X),
        "boosting fit (100 trees, 8000x12)": lambda: BoostedRegressor(n_trees=100, seed=0).fit(X, y_reg).predict(X),
        "ensemble predict (50 trees, 8000 rows)": lambda: forest.vote_fraction(X),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"]
    try:
        kernels.get("be_integrate", "cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")
    work = _workloads()
    print(f"{'workload':<48} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, fn in work.items():
        times, results = [], []
        for b in backends:
            kernels.use(b)
            results.append(fn())
            best = min(_timed(fn) for _ in range(args.repeat))
            times.append(best)
        ok = all(np.allclose(results[0], r, rtol=1e-9, atol=1e-9) for r in results[1:])
        speed = f"{times[-1] / times[0]:8.1f}x" if len(times) > 1 else ""
        print(f"{name:<48} " + " ".join(f"{t * 1e3:8.1f}ms" for t in times) + f" {speed}"
              + ("" if ok else "   MISMATCH"))


def _timed(fn):
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


if __name__ == "__main__":
    main()

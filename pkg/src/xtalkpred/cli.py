"""Command-line pipeline: gen -> oracle -> features -> train -> predict -> eval, plus sweep.

Exit codes: 0 success, 2 usage error, 3 validation failure, 4 numerical failure.
Every command writes a run manifest next to its primary output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4


class CliError(Exception):
    def __init__(self, code, kind, message, context=""):
        super().__init__(message)
        self.code, self.kind, self.context = code, kind, context


def _validation(msg, context=""):
    return CliError(EXIT_VALIDATION, "validation", msg, context)


# ---------------------------------------------------------------------------
# run manifest

def _manifest_path(out: Path) -> Path:
    return out / "run_manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def write_manifest(command, args, inputs, outputs, seeds, started, primary) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {"command": command, "config": config, "inputs": [str(p) for p in inputs],
           "outputs": [str(p) for p in outputs], "seeds": seeds, "tool_version": __version__,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
           "duration_s": round(time.perf_counter() - started, 3)}
    _manifest_path(Path(primary)).write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")


def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise _validation(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise _validation(f"{what} is not valid JSON: {path}", str(exc)) from None


def _oracle_path(labels: Path) -> Path:
    return labels.with_name(labels.stem + ".oracle.json")


def _load_design(path):
    from .layout import load_design
    return load_design(path)


def _pairs(design, w_max):
    from .layout import default_w_max, extract_coupling_pairs
    wm = default_w_max(design) if w_max is None else w_max
    return wm, extract_coupling_pairs(design, wm)


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    from .bench_gen import GenConfig, generate_suite, write_suite

    started = time.perf_counter()
    doc = _read_json(args.config, "config") if args.config else {}
    count = int(doc.pop("count", args.count))
    suite_seed = int(doc.pop("suite_seed", args.seed))
    cfg = GenConfig.from_dict(doc)
    cfg.check()
    designs, manifest = generate_suite(cfg, count, suite_seed, cfg.w_max)
    out = Path(args.out)
    write_suite(designs, manifest, out)
    for e in manifest["designs"]:
        print(f"{e['name']}: {e['n_nets']} nets, {e['n_pairs']} pairs, "
              f"coupled {e['coupled_fraction']:.3f}, window TSI {e['tsi_fraction_window']:.3f}")
    write_manifest("gen", args, [args.config] if args.config else [],
                   [out / f"{d.name}.json" for d in designs] + [out / "manifest.json"],
                   {"suite_seed": suite_seed, "designs": [e["seed"] for e in manifest["designs"]]},
                   started, out)
    return 0


def cmd_oracle(args) -> int:
    from .labeling import label_design, pair_labels
    from .timing import classify_pairs_by_window, save_labels

    started = time.perf_counter()
    if args.guard < 0:
        raise _validation(f"--guard must be >= 0, got {args.guard}")
    design = _load_design(args.design)
    wm, pairs = _pairs(design, args.w_max)
    results = label_design(design, pairs, args.segments_per_wire, args.dt, args.direction, args.jobs)
    labels = pair_labels(design, pairs, results, args.threshold)
    out = Path(args.out)
    save_labels(labels, out)
    results.save(_oracle_path(out))
    n_tsi = sum(lab.classification == "TSI" for lab in labels)
    glitches = sum(r.glitch for r in results.pairs.values()) + sum(r.glitch for r in results.nets.values())
    print(f"{design.name}: {len(labels)} directed pairs ({n_tsi} TSI, {len(labels) - n_tsi} FSI), "
          f"{len(results.nets)} nets, w_max {wm:.4f} um, {glitches} glitch flag(s)")
    if labels:
        window = classify_pairs_by_window(design, pairs, args.guard)
        agree = sum(window[(lab.pair.victim_segment_id, lab.pair.aggressor_segment_id)] == lab.classification
                    for lab in labels)
        print(f"window rule (guard {args.guard:g} ps) agrees with oracle labels on {agree / len(labels):.4f} of pairs")
    write_manifest("oracle", args, [args.design], [out, _oracle_path(out)], {}, started, out)
    return 0


def _sweep_config(doc):
    from .tech import DRIVER_LIBRARY, two_net_config

    cells = {c.name: c for c in DRIVER_LIBRARY}
    allowed = {"length", "spacing", "cell", "s_in", "sink_cap", "direction", "segments_per_wire",
               "victim_at", "at_min", "at_max", "step", "dt"}
    unknown = set(doc) - allowed
    if unknown:
        raise _validation(f"unknown sweep config key(s) {sorted(unknown)}")
    if doc.get("cell", "INVX4") not in cells:
        raise _validation(f"unknown cell {doc['cell']!r}")
    cfg = two_net_config(direction=doc.get("direction", "opposite"),
                      segments_per_wire=int(doc.get("segments_per_wire", 8)),
                      length=float(doc.get("length", 100.0)), spacing=float(doc.get("spacing", 0.05)),
                      cell=cells[doc.get("cell", "INVX4")], s_in=float(doc.get("s_in", 20.0)),
                      sink_cap=float(doc.get("sink_cap", 2.0)))
    cfg.victim_at_in = float(doc.get("victim_at", 100.0))
    rng = (float(doc.get("at_min", 0.0)), float(doc.get("at_max", 200.0)), float(doc.get("step", 5.0)))
    return cfg, rng, doc.get("dt")


def cmd_sweep(args) -> int:
    from .oracle import sweep_skew, write_sweep

    started = time.perf_counter()
    doc = _read_json(args.config, "config") if args.config else {}
    cfg, (lo, hi, step), dt = _sweep_config(doc)
    if not step > 0 or hi < lo:
        raise _validation("sweep needs step > 0 and at_max >= at_min")
    rows = sweep_skew(cfg, lo, hi, step, dt)
    out = Path(args.out)
    write_sweep(rows, out)
    peak = max(rows, key=lambda r: abs(r[3]))
    print(f"{len(rows)} points; peak |delta| {abs(peak[3]):.4f} ps at dskew {peak[0]:.1f} ps "
          "(net delay measured driver output to sink)")
    write_manifest("sweep", args, [args.config] if args.config else [], [out], {}, started, out)
    return 0


def cmd_features(args) -> int:
    from .features import Dataset, extract_features, pair_samples, save_dataset
    from .labeling import OracleResults

    started = time.perf_counter()
    inputs = [args.design]
    design = _load_design(args.design)
    wm, pairs = _pairs(design, args.w_max)
    oracle = None
    if args.labels:
        path = _oracle_path(Path(args.labels))
        if not path.exists():
            raise _validation(f"oracle results not found next to labels: {path}")
        oracle = OracleResults.load(path)
        if oracle.design_name != design.name:
            raise _validation(f"labels are for design {oracle.design_name!r}, not {design.name!r}")
        inputs += [args.labels, path]
    fn = pair_samples if args.granularity == "pair" else extract_features
    samples = fn(design, pairs, wm, oracle=oracle, threshold=args.threshold)
    out = Path(args.out)
    save_dataset(Dataset(samples), out)
    print(f"{design.name}: {len(samples)} samples ({args.granularity} granularity)")
    write_manifest("features", args, inputs, [out, Path(f"{out}.meta.json")], {}, started, out)
    return 0


def _save_onestep(path, model, mean, scale):
    doc = {"format": "xtalkpred-onestep", "version": 1, "model": model.to_dict(),
           "mean": list(map(float, mean)), "scale": list(map(float, scale))}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    from .features import concat, load_dataset, normalize, split
    from .model import (ModelConfig, evaluate, evaluate_onestep, save_model, train_onestep_baseline,
                        train_two_step)

    started = time.perf_counter()
    ds = concat([load_dataset(p) for p in args.datasets])
    if not len(ds):
        raise _validation("no samples in the given datasets")
    ds = normalize(split(ds, args.split, args.seed, by_design=args.by_design))
    cfg = ModelConfig(seed=args.seed, grid=args.grid)
    model, metrics = train_two_step(ds, cfg)
    out = Path(args.out)
    save_model(model, out)
    outputs = [out]
    test = ds.test()
    summary = {k: m.to_dict() for k, m in metrics.items()}
    summary["feature_importance"] = model.feature_importance()
    if len(test):
        summary["two_step_total"] = evaluate(model, test).to_dict()
    if args.onestep:
        one, m1 = train_onestep_baseline(ds, cfg)
        path = out.with_name(out.stem + ".onestep.json")
        _save_onestep(path, one, ds.mean, ds.scale)
        outputs.append(path)
        summary["one_step_total"] = evaluate_onestep(one, ds.mean, ds.scale, test).to_dict() if len(test) else {}
    mpath = out.with_name(out.stem + ".metrics.json")
    mpath.write_text(json.dumps(_clean(summary), indent=1, sort_keys=True) + "\n")
    outputs.append(mpath)
    c, r, n = metrics["classifier"], metrics["regressor"], metrics["nosi"]
    print(f"train {len(ds.train())} / test {len(test)} samples")
    print(f"step 1 classifier: accuracy {c.accuracy:.4f} precision {c.precision:.4f} recall {c.recall:.4f}")
    print(f"step 2 delta regressor: R2 {r.r2:.4f}")
    print(f"quiet-delay regressor: R2 {n.r2:.4f}")
    top = sorted(summary["feature_importance"]["classifier"].items(), key=lambda kv: -kv[1])[:3]
    print("classifier split share: " + ", ".join(f"{k} {v:.3f}" for k, v in top)
          + f", rf {summary['feature_importance']['classifier']['rf']:.3f}")
    if "one_step_total" in summary and summary["one_step_total"]:
        print(f"total segment delay R2: two-step {summary['two_step_total']['r2']:.4f} "
              f"one-step {summary['one_step_total']['r2']:.4f}")
    write_manifest("train", args, args.datasets, outputs, {"seed": args.seed, "split_seed": args.seed},
                   started, out)
    return 0


def _clean(x):
    """NaN -> null, so metric files stay strict JSON."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return None if isinstance(x, float) and math.isnan(x) else x


def cmd_predict(args) -> int:
    from .labeling import OracleResults
    from .model import load_model
    from .sta import build_report

    started = time.perf_counter()
    design = _load_design(args.design)
    model = load_model(args.model)
    wm, pairs = _pairs(design, args.w_max)
    inputs = [args.design, args.model]
    oracle = None
    if args.labels:
        path = _oracle_path(Path(args.labels))
        oracle = OracleResults.load(path)
        inputs += [args.labels, path]
    paths = []
    if args.paths:
        paths = _read_json(args.paths, "paths file")
        inputs.append(args.paths)
        bad = [n for p in paths for n in p if n not in design.nets]
        if bad or not all(paths):
            raise _validation(f"paths reference unknown nets {bad}" if bad else "empty path in paths file")
    report = build_report(design, model, pairs, wm, oracle, args.threshold, paths)
    out = Path(args.out)
    report.save(out)
    print(report.table())
    for p in report.paths:
        print(f"path {[s.net_id for s in p.stages]}: {p.d_path:.3f} ps")
    write_manifest("predict", args, inputs, [out], {}, started, out)
    return 0


def cmd_eval(args) -> int:
    from .labeling import OracleResults
    from .model import accuracy_ratio, classification_metrics, r2_score
    from .timing import load_labels

    started = time.perf_counter()
    report = _read_json(args.report, "report")
    labels = {(lab.pair.victim_segment_id, lab.pair.aggressor_segment_id): lab for lab in load_labels(args.labels)}
    rows = report["aggressors"]
    missing = [(r["victim_segment"], r["aggressor_segment"]) for r in rows
               if (r["victim_segment"], r["aggressor_segment"]) not in labels]
    if missing:
        raise _validation(f"{len(missing)} report pair(s) have no label, e.g. {missing[0]}")
    truth = [labels[(r["victim_segment"], r["aggressor_segment"])].classification == "TSI" for r in rows]
    pred = [r["classification"] == "TSI" for r in rows]
    cm = classification_metrics(truth, pred)
    out = {"pairs": len(rows), "accuracy": cm.accuracy, "precision": cm.precision, "recall": cm.recall,
           "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn}}
    tsi = [i for i, t in enumerate(truth) if t]
    if tsi:
        g = [labels[(rows[i]["victim_segment"], rows[i]["aggressor_segment"])].oracle_delta for i in tsi]
        out["delta_r2_tsi"] = r2_score(g, [rows[i]["delta"] for i in tsi])
    path = _oracle_path(Path(args.labels))
    inputs = [args.report, args.labels]
    if path.exists():
        oracle = OracleResults.load(path)
        inputs.append(path)
        stages = report["stages"]
        golden = np.array([oracle.nets[s["net_id"]].d_stage_si for s in stages])
        pred_stage = np.array([s["d_stage"] for s in stages])
        out["stage_r2"] = r2_score(golden, pred_stage)
        out["accuracy_ratio"] = accuracy_ratio(golden, pred_stage)
    print(f"pairs {out['pairs']}  accuracy {cm.accuracy:.4f}  precision {cm.precision:.4f}  "
          f"recall {cm.recall:.4f}")
    if "stage_r2" in out:
        print(f"stage R2 {out['stage_r2']:.4f}  accuracy_ratio {out['accuracy_ratio']:.4f}")
    if "delta_r2_tsi" in out:
        print(f"delta R2 on oracle-TSI pairs {out['delta_r2_tsi']:.4f}")
    print("confusion      pred TSI  pred FSI")
    print(f"  oracle TSI  {cm.tp:>8}  {cm.fn:>8}")
    print(f"  oracle FSI  {cm.fp:>8}  {cm.tn:>8}")
    if args.out:
        Path(args.out).write_text(json.dumps(_clean(out), indent=1, sort_keys=True) + "\n")
        write_manifest("eval", args, inputs, [args.out], {}, started, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser

def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return parse


def _fraction(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xtalkpred", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic benchmark suite")
    g.add_argument("--config", help="GenConfig JSON (may also hold count and suite_seed)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--count", type=_positive(int), default=1)
    g.add_argument("--seed", type=int, default=0, help="suite seed")
    g.set_defaults(func=cmd_gen)

    o = sub.add_parser("oracle", help="label every coupling pair and net with the transient oracle")
    o.add_argument("design")
    o.add_argument("--out", required=True, help="pair label JSON; oracle results go to <stem>.oracle.json")
    o.add_argument("--dt", type=_positive(float), default=None, help="time step in ps (default: automatic)")
    o.add_argument("--segments-per-wire", type=_positive(int), default=8)
    o.add_argument("--threshold", type=float, default=1.0, help="TSI threshold on |delta| in ps")
    o.add_argument("--direction", choices=("opposite", "same"), default="opposite")
    o.add_argument("--w-max", type=_positive(float), default=None)
    o.add_argument("--jobs", type=_positive(int), default=1)
    o.add_argument("--guard", type=float, default=0.0, help="window guard band in ps for the agreement summary")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sweep", help="skew sweep on the two-net parallel configuration")
    s.add_argument("--config", help="sweep JSON (length, spacing, cell, s_in, sink_cap, direction, "
                                    "victim_at, at_min, at_max, step, segments_per_wire, dt)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("features", help="extract the feature dataset of a design")
    f.add_argument("design")
    f.add_argument("--labels", help="pair label JSON written by 'oracle' (omit for unlabeled samples)")
    f.add_argument("--out", required=True)
    f.add_argument("--granularity", choices=("segment", "pair"), default="segment")
    f.add_argument("--threshold", type=float, default=1.0)
    f.add_argument("--w-max", type=_positive(float), default=None)
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", help="train the two-step model")
    t.add_argument("datasets", nargs="+")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--split", type=_fraction, default=0.7, help="train fraction")
    t.add_argument("--by-design", action="store_true", help="split whole designs instead of samples")
    t.add_argument("--grid", action="store_true", help="3x3 hyperparameter grid search")
    t.add_argument("--onestep", action="store_true", help="also train the one-step baseline")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", help="predict stage delays and write the crosstalk report")
    r.add_argument("design")
    r.add_argument("--model", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--labels", help="pair label JSON; adds golden columns from its oracle results")
    r.add_argument("--paths", help="JSON list of net id sequences")
    r.add_argument("--threshold", type=float, default=1.0)
    r.add_argument("--w-max", type=_positive(float), default=None)
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="score a report against oracle labels")
    e.add_argument("report")
    e.add_argument("--labels", required=True)
    e.add_argument("--out", help="metrics JSON")
    e.set_defaults(func=cmd_eval)
    return p


def _classify(exc):
    from .bench_gen import GenError
    from .features import FeatureError
    from .layout import DesignError
    from .model import ModelError
    from .oracle import OracleError
    from .sta import StaError
    from .timing import LabelError

    if isinstance(exc, CliError):
        return exc.code, exc.kind
    if isinstance(exc, (OracleError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError)):
        return EXIT_NUMERICAL, "numerical"
    if isinstance(exc, (DesignError, FeatureError, ModelError, GenError, LabelError, StaError,
                        FileNotFoundError, KeyError, ValueError)):
        return EXIT_VALIDATION, "validation"
    return None, None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001  (mapped to exit codes below)
        code, kind = _classify(exc)
        if code is None:
            raise
        msg = str(exc).replace("\n", " ")
        print(f"error: command={args.command} kind={kind} code={code} message={json.dumps(msg)}", file=sys.stderr)
        context = getattr(exc, "context", "") or type(exc).__name__
        print(f"  {context}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``otprop {transduce,induct,benchmark,metrics}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .benchmark import emit_results, load_config, run_benchmark, write_traces
from .datasets import load_csv, make_splits
from .induction import InductionModel, load_model, save_model
from .propagation import OTPConfig, propagate


def _read_columns(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    return header, rows


def _pick_column(header: list[str], wanted: str | None, fallbacks: tuple[str, ...]) -> int:
    if wanted is not None:
        if wanted not in header:
            raise SystemExit(f"no column {wanted!r} in {header}")
        return header.index(wanted)
    for name in fallbacks:
        if name in header:
            return header.index(name)
    return len(header) - 1


def cmd_transduce(args) -> int:
    ds = load_csv(args.data, args.label_col, standardize_features=not args.no_standardize)
    split = make_splits(ds, args.labeled_frac, [args.seed])[0]
    X, y = ds.features, ds.labels
    config = OTPConfig(epsilon=args.epsilon, alpha=args.alpha)
    pred, trace = propagate(X[split.labeled], y[split.labeled], X[split.unlabeled], config)
    names = ds.class_names
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "true", "predicted", "certainty", "iteration"])
        for j, idx in enumerate(split.unlabeled.tolist()):
            rec = trace.points[j]
            writer.writerow([idx, names[y[idx]], names[pred[j]], repr(rec.certainty), rec.iteration])
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_csv())
    if args.model_out:
        model = InductionModel.from_transduction(
            X[split.labeled], np.array(names)[y[split.labeled]],
            X[split.unlabeled], np.array(names)[pred], trace,
            center=ds.center, scale=ds.scale,
        )
        save_model(model, args.model_out)
    for w in trace.warnings:
        logging.warning(w)
    print(f"labeled={split.labeled.size} unlabeled={split.unlabeled.size} "
          f"iterations={trace.n_iterations} acc={metrics.accuracy(y[split.unlabeled], pred):.4f}")
    return 0


def cmd_induct(args) -> int:
    model = load_model(args.model)
    header, rows = _read_columns(args.points)
    keep = [k for k, h in enumerate(header) if h != args.label_col]
    try:
        points = np.array([[float(r[k]) for k in keep] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise SystemExit(f"{args.points}: non-numeric feature value ({exc})") from None
    pred = model.predict(points.reshape(len(rows), len(keep)))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "predicted"])
        for idx, lab in enumerate(pred.tolist()):
            writer.writerow([idx, lab])
    return 0


def cmd_benchmark(args) -> int:
    datasets, cfg = load_config(args.config)
    if args.large:
        cfg.large = True
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_benchmark(datasets, cfg.fractions, cfg.seeds, cfg.algorithms, cfg)
    for note in report.skipped:
        logging.warning("skipped %s", note)
    if not report.cells:
        print("no benchmark cells to run")
        return 0
    emit_results(report, "csv", out / "results.csv")
    emit_results(report, "json", out / "results.json")
    write_traces(report, out / "traces")
    for entry in report.aggregate["summary"]:
        print(f"{entry['dataset']:>12} {entry['fraction']:.2f} {entry['algorithm']:>4} "
              f"acc={entry['acc_mean']:.4f}±{entry['acc_std']:.4f} "
              f"nmi={entry['nmi_mean']:.4f} ari={entry['ari_mean']:.4f}")
    failures = [c for c in report.cells if c.error is not None]
    if failures:
        print(f"{len(failures)} cells failed; see results.json", file=sys.stderr)
    return 0


def cmd_metrics(args) -> int:
    t_header, t_rows = _read_columns(args.truth)
    p_header, p_rows = _read_columns(args.pred)
    t_col = _pick_column(t_header, args.truth_col, ("true", "label", "class"))
    p_col = _pick_column(p_header, args.pred_col, ("predicted", "label", "class"))
    truth = [r[t_col].strip() for r in t_rows]
    pred = [r[p_col].strip() for r in p_rows]
    if len(truth) != len(pred):
        raise SystemExit(f"length mismatch: {len(truth)} true labels, {len(pred)} predictions")
    print(f"acc={metrics.accuracy(truth, pred):.6f}")
    print(f"nmi={metrics.nmi(truth, pred):.6f}")
    print(f"ari={metrics.ari(truth, pred):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otprop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transduce", help="label the unlabeled part of a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", required=True)
    p.add_argument("--labeled-frac", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=OTPConfig.epsilon)
    p.add_argument("--alpha", type=float, default=OTPConfig.alpha)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--model-out", help="also write an induction model file")
    p.add_argument("--trace-out", help="also write the per-iteration trace CSV")
    p.set_defaults(func=cmd_transduce)

    p = sub.add_parser("induct", help="label new points with a saved induction model")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--label-col", help="column to ignore if the points file carries labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_induct)

    p = sub.add_parser("benchmark", help="run the benchmark protocol from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--large", action="store_true", help="include datasets with more than 600 points")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("metrics", help="ACC/NMI/ARI between two label files")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth-col")
    p.add_argument("--pred-col")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""``hrt`` command-line entry point.

Exit codes: 0 success, 2 usage or bad flag values, 3 data errors, 4 fit or
numerical errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import HrtConfig, parse_step
from .datasets import SyntheticFunction, SyntheticSpec, generate, load_csv, to_csv
from .errors import DataError, FitError, ParseError, RaggedRows
from .evaluation import (
    CsvSource,
    ablate,
    classification_metrics,
    format_table,
    regression_metrics,
    rows_to_csv,
)
from .tree import fit, load, predict, predict_class, save

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 2, 3, 4


def _add_source(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--csv", help="numeric CSV file")
    src.add_argument("--synth", choices=[f.value for f in SyntheticFunction], help="synthetic function")
    p.add_argument("--target", default="-1", help="target column name or index (default: last)")
    p.add_argument("--no-header", action="store_true", help="CSV has no header line")
    p.add_argument("--n", type=int, default=1000, help="synthetic sample count")
    p.add_argument("--noise", type=float, default=None, help="synthetic noise sigma (default: per function)")


def _add_config(p):
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--min-samples", type=int, default=10)
    p.add_argument("--rmse-threshold", type=float, default=0.0)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--step", default="auto", help="'auto' or a fixed damping factor in (0, 1]")
    p.add_argument("--t-max", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--jobs", type=int, default=1)


def _build_parser():
    parser = argparse.ArgumentParser(prog="hrt", description="Hinge regression trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a tree and write a model file")
    _add_source(p)
    _add_config(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classify", action="store_true", help="fit 0/1 targets for classification")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("predict", help="predict rows of a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--csv", required=True, help="feature-only CSV")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--classify", action="store_true", help="emit 'prob,label' per row")
    p.add_argument("--out", help="output file (default: standard output)")

    p = sub.add_parser("eval", help="score a model on labelled data")
    p.add_argument("--model", required=True)
    _add_source(p)
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic data")
    p.add_argument("--classify", action="store_true", help="report AUC, accuracy and F1")

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    p.add_argument("--fn", required=True, choices=[f.value for f in SyntheticFunction])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: standard output)")

    p = sub.add_parser("ablate", help="compare step policies over repeated runs")
    _add_source(p)
    _add_config(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", default="0.01,0.05,0.1,0.5,1,auto")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--out", help="CSV file for the ablation rows")
    return parser


def _target(text):
    return int(text) if text.lstrip("-").isdigit() else text


def _synth_spec(args, seed):
    fn = SyntheticFunction(args.synth)
    noise = fn.default_noise if args.noise is None else args.noise
    return SyntheticSpec(fn, args.n, noise, seed)


def _source(args, seed):
    """CsvSource or SyntheticSpec from the data flags."""
    if args.csv is not None:
        return CsvSource(args.csv, _target(args.target), not args.no_header)
    return _synth_spec(args, seed)


def _materialize(source):
    if isinstance(source, CsvSource):
        return load_csv(source.path, source.target, source.header)
    return generate(source)


def _config(args):
    return HrtConfig(
        max_depth=args.max_depth,
        min_samples=args.min_samples,
        rmse_threshold=args.rmse_threshold,
        ridge_alpha=args.ridge,
        step_policy=parse_step(args.step),
        t_max=args.t_max,
        epsilon=args.epsilon,
        seed=args.seed,
    )


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_model(path):
    return load(Path(path).read_bytes())


def cmd_train(args):
    cfg = _config(args)
    data = _materialize(_source(args, args.seed))
    task = "classification" if args.classify else "regression"
    model = fit(data, cfg, task=task, jobs=args.jobs)
    Path(args.out).write_bytes(save(model))
    lines = [f"{k}={v}" for k, v in model.report.summary().items()]
    lines += [f"{k}={v}" for k, v in cfg.as_dict().items()]
    lines += [f"n={data.n}", f"d={data.d}", f"out={args.out}"]
    print("\n".join(lines))


def cmd_predict(args):
    model = _read_model(args.model)
    X = _read_features(args.csv, not args.no_header)
    if X is None:
        text = ""
    elif args.classify:
        prob, label = predict_class(model, X)
        text = "".join(f"{float(p)!r},{int(c)}\n" for p, c in zip(prob, label))
    else:
        text = "".join(f"{float(v)!r}\n" for v in predict(model, X))
    _write(text, args.out)


def _read_features(path, header):
    # predict input has no target column, so every column is a feature
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if header:
        rows = rows[1:]
    if not rows:
        return None
    width = len(rows[0])
    X = np.empty((len(rows), width))
    first = 2 if header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"line {first + i} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                X[i, j] = float(cell)
            except ValueError:
                raise ParseError(first + i, j + 1, f"cannot parse {cell!r} as a number") from None
    return X


def cmd_eval(args):
    model = _read_model(args.model)
    data = _materialize(_source(args, args.seed))
    if args.classify:
        prob, _ = predict_class(model, data.features)
        metrics = classification_metrics(prob, data.y)
    else:
        metrics = regression_metrics(predict(model, data.features), data.y)
    print("\n".join(f"{k}={v!r}" for k, v in vars(metrics).items()))


def cmd_synth(args):
    fn = SyntheticFunction(args.fn)
    noise = fn.default_noise if args.noise is None else args.noise
    _write(to_csv(generate(SyntheticSpec(fn, args.n, noise, args.seed))), args.out)


def cmd_ablate(args):
    labels = [s.strip() for s in args.steps.split(",") if s.strip()]
    for label in labels:
        parse_step(label)
    rows = ablate(
        _source(args, args.seed),
        labels,
        _config(args),
        repetitions=args.reps,
        train_fraction=args.train_fraction,
        seed=args.seed,
        jobs=args.jobs,
    )
    if args.out:
        Path(args.out).write_text(rows_to_csv(rows), encoding="utf-8")
    sys.stdout.write(format_table(rows))


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "ablate": cmd_ablate,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except DataError as exc:
        print(f"hrt: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"hrt: fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"hrt: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"hrt: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

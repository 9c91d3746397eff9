"""Metrics, repeated-run experiments and the step-size ablation harness."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Union

import numpy as np
from scipy.stats import rankdata

from .config import HrtConfig, parse_step
from .datasets import SplitSpec, SyntheticSpec, generate, load_csv, split
from .errors import InvalidLabels, LengthMismatch, SingleClass, ZeroVariance
from .tree import fit


@dataclass(frozen=True)
class RegressionMetrics:
    rmse: float
    mae: float
    r2: float


@dataclass(frozen=True)
class ClassificationMetrics:
    auc: float
    accuracy: float
    f1: float


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions for {truth.size} targets")
    if pred.size == 0:
        raise LengthMismatch("metrics need at least one sample")
    return pred, truth


def regression_metrics(pred, truth) -> RegressionMetrics:
    pred, truth = _pair(pred, truth)
    err = truth - pred
    sst = float(np.sum((truth - truth.mean()) ** 2))
    if sst == 0.0:
        raise ZeroVariance("R^2 is undefined when all targets are equal")
    sse = float(err @ err)
    return RegressionMetrics(
        rmse=math.sqrt(sse / err.size),
        mae=float(np.mean(np.abs(err))),
        r2=1.0 - sse / sst,
    )


def auc_score(prob, label):
    """Mann-Whitney AUC with midranks for ties."""
    prob, label = _pair(prob, label)
    pos = label == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(prob)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def classification_metrics(prob, label) -> ClassificationMetrics:
    """AUC plus accuracy and positive-class F1 at the inclusive 0.5 threshold."""
    prob, label = _pair(prob, label)
    if not np.all(np.isin(label, (0.0, 1.0))):
        raise InvalidLabels("labels must be 0 or 1")
    auc = auc_score(prob, label)
    guess = prob >= 0.5
    truth = label == 1
    tp = int(np.sum(guess & truth))
    fp = int(np.sum(guess & ~truth))
    fn = int(np.sum(~guess & truth))
    f1 = 2.0 * tp / (2 * tp + fp + fn) if tp else 0.0
    return ClassificationMetrics(auc=auc, accuracy=float(np.mean(guess == truth)), f1=f1)


@dataclass(frozen=True)
class CsvSource:
    path: str
    target: Union[str, int] = -1
    header: bool = True


@dataclass(frozen=True)
class ExperimentSpec:
    source: Union[SyntheticSpec, CsvSource]
    cfg: HrtConfig = HrtConfig()
    repetitions: int = 10
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def rep_seed(self, rep):
        return int(np.random.SeedSequence([self.seed, rep]).generate_state(1)[0])


@dataclass(frozen=True)
class AblationRow:
    step_label: str
    mean_rmse: float
    mean_leaves: float
    avg_iters: float
    fit_seconds: float
    avg_fallbacks: float
    avg_splits: float
    fallback_rate_pct: float


@dataclass(frozen=True)
class RepetitionResult:
    seed: int
    metrics: RegressionMetrics
    n_leaves: int
    n_splits: int
    n_fallbacks: int
    avg_iterations: float
    fit_seconds: float


@dataclass(frozen=True)
class ExperimentSummary:
    mean: RegressionMetrics
    std: RegressionMetrics
    row: AblationRow
    repetitions: tuple


def fallback_rate(avg_fallbacks, avg_splits):
    return 100.0 * avg_fallbacks / avg_splits if avg_splits > 0 else 0.0


def _run_repetition(spec: ExperimentSpec, rep: int, data=None) -> RepetitionResult:
    seed = spec.rep_seed(rep)
    if isinstance(spec.source, SyntheticSpec):
        data = generate(replace(spec.source, seed=seed))
    elif data is None:
        data = load_csv(spec.source.path, spec.source.target, spec.source.header)
    train, test = split(data, SplitSpec(spec.train_fraction, seed))
    model = fit(train, replace(spec.cfg, seed=seed))
    metrics = regression_metrics(model.predict(test.features), test.y)
    r = model.report
    return RepetitionResult(
        seed=seed,
        metrics=metrics,
        n_leaves=r.n_leaves,
        n_splits=r.n_splits,
        n_fallbacks=r.n_fallbacks,
        avg_iterations=r.avg_iterations,
        fit_seconds=r.fit_seconds,
    )


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def summarize(results, step_label) -> ExperimentSummary:
    cols = {f.name: [getattr(r.metrics, f.name) for r in results] for f in fields(RegressionMetrics)}
    mean = RegressionMetrics(**{k: float(np.mean(v)) for k, v in cols.items()})
    std = RegressionMetrics(**{k: _std(v) for k, v in cols.items()})
    avg_fallbacks = float(np.mean([r.n_fallbacks for r in results]))
    avg_splits = float(np.mean([r.n_splits for r in results]))
    row = AblationRow(
        step_label=step_label,
        mean_rmse=mean.rmse,
        mean_leaves=float(np.mean([r.n_leaves for r in results])),
        avg_iters=float(np.mean([r.avg_iterations for r in results])),
        fit_seconds=float(np.mean([r.fit_seconds for r in results])),
        avg_fallbacks=avg_fallbacks,
        avg_splits=avg_splits,
        fallback_rate_pct=fallback_rate(avg_fallbacks, avg_splits),
    )
    return ExperimentSummary(mean=mean, std=std, row=row, repetitions=tuple(results))


def run_experiment(spec: ExperimentSpec, step_label: Optional[str] = None, jobs=1) -> ExperimentSummary:
    """Fit and score ``spec.repetitions`` times with derived per-repetition seeds.

    Synthetic sources are regenerated per repetition; CSV sources are loaded
    once and re-split. ``jobs > 1`` runs repetitions in worker processes,
    which perturbs ``fit_seconds`` but nothing else.
    """
    label = step_label if step_label is not None else spec.cfg.step_policy.label
    data = None
    if isinstance(spec.source, CsvSource):
        data = load_csv(spec.source.path, spec.source.target, spec.source.header)
    reps = range(spec.repetitions)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_repetition, [spec] * len(reps), reps, [data] * len(reps)))
    else:
        results = [_run_repetition(spec, rep, data) for rep in reps]
    return summarize(results, label)


def ablate(source, step_labels, base_cfg: HrtConfig, repetitions=10, train_fraction=0.7, seed=0, jobs=1):
    """One AblationRow per step label, varying only the step policy."""
    step_labels = list(step_labels)
    if not step_labels:
        raise ValueError("need at least one step label")
    rows = []
    for label in step_labels:
        cfg = replace(base_cfg, step_policy=parse_step(label))
        spec = ExperimentSpec(source, cfg, repetitions, train_fraction, seed)
        rows.append(run_experiment(spec, step_label=str(label), jobs=jobs).row)
    return rows


ROW_FIELDS = [f.name for f in fields(AblationRow)]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        values = asdict(row)
        writer.writerow([values["step_label"]] + [f"{values[k]:.6g}" for k in ROW_FIELDS[1:]])
    return buf.getvalue()


def format_table(rows) -> str:
    header = ROW_FIELDS
    body = [[r.step_label] + [f"{getattr(r, k):.5g}" for k in header[1:]] for r in rows]
    widths = [max([len(h)] + [len(b[i]) for b in body]) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"

"""Recursive construction, prediction and serialization of hinge regression trees."""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .config import HrtConfig
from .errors import (
    CorruptPayload,
    DimensionMismatch,
    EmptyTrainingSet,
    FormatError,
    InvalidLabels,
    Unsplittable,
)
from .linalg import DesignMatrix, augment, ridge_arrays
from .split import HingeKind, SplitOutcome, SplitParams, fallback_split, select_split

FORMAT_VERSION = "v1"
TASKS = ("regression", "classification")


@dataclass(frozen=True, eq=False)
class Leaf:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise ValueError("leaf coefficients must be finite")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True, eq=False)
class Internal:
    split: SplitParams
    left: "TreeNode"
    right: "TreeNode"
    fallback_used: bool = False


TreeNode = Union[Leaf, Internal]


@dataclass
class FitReport:
    n_leaves: int = 0
    depth: int = 0
    n_splits: int = 0
    n_fallbacks: int = 0
    avg_iterations: float = 0.0
    fit_seconds: float = 0.0
    per_node_traces: list = field(default_factory=list)

    def summary(self):
        return {
            "leaves": self.n_leaves,
            "depth": self.depth,
            "splits": self.n_splits,
            "fallbacks": self.n_fallbacks,
            "avg_iters": self.avg_iterations,
            "seconds": self.fit_seconds,
        }


@dataclass(eq=False)
class HrtModel:
    root: TreeNode
    d: int
    cfg: Optional[HrtConfig] = None
    report: Optional[FitReport] = None
    task: str = "regression"

    def predict(self, X):
        return predict(self, X)

    def predict_class(self, X):
        return predict_class(self, X)

    def leaves(self):
        return list(_iter_leaves(self.root))


# -- fitting --------------------------------------------------------------------


def _node_seed(seed, path, purpose):
    return np.random.SeedSequence(entropy=seed, spawn_key=(*path, purpose))


class _Builder:
    # purposes appended to a node path when deriving its seeds
    SPLIT, FALLBACK = 2, 3

    def __init__(self, data, cfg, jobs):
        self.Xa = data.Xa
        self.y = data.y
        self.cfg = cfg
        self.jobs = jobs
        self.outcomes = {}

    def _leaf_fit(self, idx):
        theta = ridge_arrays(self.Xa[idx], self.y[idx], self.cfg.ridge_alpha)
        r = self.y[idx] - self.Xa[idx] @ theta
        return theta, float(np.sqrt(r @ r / len(idx)))

    def build(self, idx, depth, path):
        cfg = self.cfg
        theta_leaf, rmse = self._leaf_fit(idx)
        if depth >= cfg.max_depth or len(idx) < cfg.min_samples or rmse < cfg.rmse_threshold:
            return Leaf(theta_leaf)

        node = DesignMatrix(self.Xa[idx], self.y[idx])
        outcome = select_split(node, cfg, rng_seed=_node_seed(cfg.seed, path, self.SPLIT))
        self.outcomes[path] = outcome
        params, fallback = outcome.params, False
        if not outcome.converged:
            try:
                params = fallback_split(node, rng_seed=_node_seed(cfg.seed, path, self.FALLBACK))
            except Unsplittable:
                return Leaf(theta_leaf)
            fallback = True

        go_left = route_mask(node.Xa, params)
        left_idx, right_idx = idx[go_left], idx[~go_left]
        if len(left_idx) < cfg.min_samples or len(right_idx) < cfg.min_samples:
            return Leaf(theta_leaf)

        if self.jobs > 1 and depth == 0:
            with ThreadPoolExecutor(max_workers=1) as pool:
                future = pool.submit(self.build, left_idx, depth + 1, (*path, 0))
                right = self.build(right_idx, depth + 1, (*path, 1))
                left = future.result()
        else:
            left = self.build(left_idx, depth + 1, (*path, 0))
            right = self.build(right_idx, depth + 1, (*path, 1))
        return Internal(params, left, right, fallback)


def fit(train: DesignMatrix, cfg: Optional[HrtConfig] = None, task="regression", jobs=1) -> HrtModel:
    """Grow a hinge regression tree on ``train``.

    Each node first fits a ridge leaf and stops if the depth limit, the
    minimum sample count or the RMSE threshold is reached. Otherwise it fits
    the best hinge split; a split that fails to converge is replaced by a
    random-feature median split. Splits leaving fewer than ``min_samples``
    rows on either side turn the node back into its leaf. Rows with
    ``x~ . theta1 >= x~ . theta2`` go left.

    ``task='classification'`` requires 0/1 targets and marks the model so
    that ``predict_class`` output is meaningful.
    """
    cfg = HrtConfig() if cfg is None else cfg
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    if train.n == 0:
        raise EmptyTrainingSet("training set has no rows")
    if train.d < 1:
        raise DimensionMismatch("training set needs at least one feature")
    if task == "classification" and not np.all(np.isin(train.y, (0.0, 1.0))):
        raise InvalidLabels("classification targets must be 0 or 1")

    start = time.perf_counter()
    builder = _Builder(train, cfg, jobs)
    root = builder.build(np.arange(train.n), 0, ())
    seconds = time.perf_counter() - start

    # deterministic order regardless of build scheduling
    outcomes = [builder.outcomes[k] for k in sorted(builder.outcomes)]
    report = FitReport(per_node_traces=outcomes, fit_seconds=seconds)
    _tally(root, 0, report)
    if outcomes:
        report.avg_iterations = float(np.mean([o.iterations for o in outcomes]))
    return HrtModel(root=root, d=train.d, cfg=cfg, report=report, task=task)


def _tally(node, depth, report):
    if isinstance(node, Leaf):
        report.n_leaves += 1
        report.depth = max(report.depth, depth)
        return
    report.n_splits += 1
    report.n_fallbacks += int(node.fallback_used)
    _tally(node.left, depth + 1, report)
    _tally(node.right, depth + 1, report)


def _iter_leaves(node):
    if isinstance(node, Leaf):
        yield node
    else:
        yield from _iter_leaves(node.left)
        yield from _iter_leaves(node.right)


# -- prediction -----------------------------------------------------------------


def route_mask(Xa, split: SplitParams):
    """True where rows go to the left child."""
    return Xa @ split.theta1 >= Xa @ split.theta2


def _as_rows(model, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.d:
        raise DimensionMismatch(f"model expects d={model.d} features, got shape {X.shape}")
    return augment(X), single


def apply(model: HrtModel, X):
    """Leaf reached by each row of ``X``, as a list of Leaf objects."""
    Xa, _ = _as_rows(model, X)
    out = [None] * Xa.shape[0]

    def walk(node, idx):
        if isinstance(node, Leaf):
            for i in idx:
                out[i] = node
            return
        go = route_mask(Xa[idx], node.split)
        walk(node.left, idx[go])
        walk(node.right, idx[~go])

    walk(model.root, np.arange(Xa.shape[0]))
    return out


def predict(model: HrtModel, X):
    """Tree output for one row (returns float) or a 2-D batch (returns array)."""
    Xa, single = _as_rows(model, X)
    out = np.empty(Xa.shape[0])

    def walk(node, idx):
        if not len(idx):
            return
        if isinstance(node, Leaf):
            out[idx] = Xa[idx] @ node.theta
            return
        go = route_mask(Xa[idx], node.split)
        walk(node.left, idx[go])
        walk(node.right, idx[~go])

    walk(model.root, np.arange(Xa.shape[0]))
    return float(out[0]) if single else out


def predict_class(model: HrtModel, X):
    """Clip the score to [0, 1]; label 1 iff the clipped score is >= 0.5."""
    score = predict(model, X)
    prob = np.clip(score, 0.0, 1.0)
    if np.ndim(prob) == 0:
        return float(prob), int(prob >= 0.5)
    return prob, (prob >= 0.5).astype(int)


# -- serialization --------------------------------------------------------------


def _floats(values):
    return ",".join(repr(float(v)) for v in values)


def _dump(node, indent, lines):
    pad = "  " * indent
    if isinstance(node, Leaf):
        lines.append(f"{pad}(leaf {' '.join(repr(float(v)) for v in node.theta)})")
        return
    s = node.split
    lines.append(
        f"{pad}(node kind={s.kind.value} t1={_floats(s.theta1)} t2={_floats(s.theta2)} "
        f"fallback={int(node.fallback_used)}"
    )
    _dump(node.left, indent + 1, lines)
    _dump(node.right, indent + 1, lines)
    lines[-1] += ")"


def save(model: HrtModel) -> bytes:
    """Encode ``model`` in the ``HRT v1`` text format."""
    lines = [f"HRT {FORMAT_VERSION} d={model.d} kind={model.task}"]
    _dump(model.root, 0, lines)
    return ("\n".join(lines) + "\n").encode("utf-8")


_HEADER = re.compile(r"^HRT (\S+) d=(\d+) kind=(\S+)$")
_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _parse_vector(text, d, what):
    parts = text.split(",")
    if len(parts) != d + 1:
        raise CorruptPayload(f"{what} has {len(parts)} values, expected {d + 1}")
    return _to_floats(parts, what)


def _to_floats(parts, what):
    try:
        values = np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError:
        raise CorruptPayload(f"non-numeric value in {what}") from None
    if not np.all(np.isfinite(values)):
        raise CorruptPayload(f"non-finite value in {what}")
    return values


class _Parser:
    def __init__(self, tokens, d):
        self.tokens = tokens
        self.pos = 0
        self.d = d

    def next(self):
        if self.pos >= len(self.tokens):
            raise CorruptPayload("unexpected end of payload")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise CorruptPayload(f"expected {tok!r}, got {got!r}")

    def fields(self):
        out = {}
        while self.pos < len(self.tokens) and "=" in self.tokens[self.pos]:
            key, _, value = self.next().partition("=")
            out[key] = value
        return out

    def node(self):
        self.expect("(")
        head = self.next()
        if head == "leaf":
            parts = []
            while self.pos < len(self.tokens) and self.tokens[self.pos] not in ("(", ")"):
                parts.append(self.next())
            if len(parts) != self.d + 1:
                raise CorruptPayload(f"leaf has {len(parts)} values, expected {self.d + 1}")
            self.expect(")")
            return Leaf(_to_floats(parts, "leaf"))
        if head != "node":
            raise CorruptPayload(f"unknown node tag {head!r}")
        f = self.fields()
        if set(f) != {"kind", "t1", "t2", "fallback"}:
            raise CorruptPayload(f"node fields {sorted(f)} are not kind/t1/t2/fallback")
        if f["kind"] not in ("max", "min") or f["fallback"] not in ("0", "1"):
            raise CorruptPayload("bad kind or fallback flag")
        t1 = _parse_vector(f["t1"], self.d, "t1")
        t2 = _parse_vector(f["t2"], self.d, "t2")
        try:
            split = SplitParams(t1, t2, HingeKind(f["kind"]))
        except ValueError as exc:
            raise CorruptPayload(str(exc)) from None
        left = self.node()
        right = self.node()
        self.expect(")")
        return Internal(split, left, right, f["fallback"] == "1")


def load(payload) -> HrtModel:
    """Decode a model produced by :func:`save`.

    The returned model has no config or fit report attached.
    """
    if isinstance(payload, (bytes, bytearray)):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptPayload("payload is not UTF-8") from None
    header, _, body = payload.partition("\n")
    if not header.startswith("HRT "):
        raise FormatError("missing 'HRT' header")
    match = _HEADER.match(header.strip())
    if match is None:
        raise FormatError(f"malformed header {header!r}")
    version, d, task = match.group(1), int(match.group(2)), match.group(3)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version!r}")
    if task not in TASKS:
        raise FormatError(f"unknown model kind {task!r}")
    if d < 1:
        raise CorruptPayload("d must be >= 1")
    parser = _Parser(_TOKEN.findall(body), d)
    root = parser.node()
    if parser.pos != len(parser.tokens):
        raise CorruptPayload("trailing data after tree")
    return HrtModel(root=root, d=d, task=task)

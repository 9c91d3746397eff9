"""Synthetic benchmark functions, train/test splitting and CSV I/O."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingTarget, ParseError, RaggedRows, TooFewRows
from .linalg import DesignMatrix


def sinc(X):
    # np.sinc(t) = sin(pi t)/(pi t) with the limit 1 at t = 0
    return -np.sinc(5.0 * X[:, 0])


def twisted_sigmoid(X):
    x = X[:, 0]
    return 2.0 / (1.0 + np.exp(-3.0 * x)) - 0.8 * x


def f1(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (
        0.5 * x1**3
        - 2.0 * x1 * x2**2
        + 3.0 * np.sin(4.0 * x1) * np.cos(2.0 * x2)
        + 0.1 * np.exp(-(x1**2 + x2**2))
    )


def f2(X):
    x1, x2 = X[:, 0], X[:, 1]
    return np.sin(3.0 * x1) + np.cos(2.0 * x2) + 0.5 * np.sin(5.0 * x1) * np.cos(4.0 * x2)


def f3(X):
    x1, x2 = X[:, 0], X[:, 1]
    r = np.sqrt(x1**2 + x2**2) + 1e-6
    return (x1**2 - x2**2) / (0.5 + r**2) + np.sin(r) * np.exp(-r)


def f4(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (
        2.0 * np.exp(-((x1 - 1.0) ** 2 + (x2 - 1.0) ** 2) / 0.5)
        - 3.0 * np.exp(-((x1 + 1.0) ** 2 + (x2 + 1.5) ** 2) / 0.3)
        + 0.5 * x1
    )


class SyntheticFunction(str, enum.Enum):
    SINC = "sinc"
    TWISTED_SIGMOID = "twisted_sigmoid"
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    F4 = "f4"

    @property
    def formula(self):
        return _FORMULAS[self]

    @property
    def domain(self):
        """Per-dimension (low, high) bounds of the sampling box."""
        if self is SyntheticFunction.SINC:
            return ((-1.5, 1.5),)
        if self is SyntheticFunction.TWISTED_SIGMOID:
            return ((-3.0, 3.0),)
        return ((-3.0, 3.0), (-3.0, 3.0))

    @property
    def default_noise(self):
        return 0.025 if len(self.domain) == 1 else 0.05


_FORMULAS = {
    SyntheticFunction.SINC: sinc,
    SyntheticFunction.TWISTED_SIGMOID: twisted_sigmoid,
    SyntheticFunction.F1: f1,
    SyntheticFunction.F2: f2,
    SyntheticFunction.F3: f3,
    SyntheticFunction.F4: f4,
}


def evaluate(function_id, X):
    """Noiseless target values of a synthetic function at rows of ``X``."""
    fn = SyntheticFunction(function_id)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(fn.domain):
        raise ValueError(f"{fn.value} takes {len(fn.domain)} inputs, got {X.shape[1]}")
    return fn.formula(X)


@dataclass(frozen=True)
class SyntheticSpec:
    function_id: SyntheticFunction
    n_samples: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "function_id", SyntheticFunction(self.function_id))
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError("noise_sigma must be finite and >= 0")

    @property
    def domain(self):
        return self.function_id.domain


def generate(spec: SyntheticSpec) -> DesignMatrix:
    """Uniform inputs over the function's box, exact targets plus Gaussian noise."""
    rng = np.random.default_rng(spec.seed)
    box = np.array(spec.domain)
    X = rng.uniform(box[:, 0], box[:, 1], size=(spec.n_samples, len(box)))
    y = spec.function_id.formula(X)
    if spec.noise_sigma > 0:
        y = y + spec.noise_sigma * rng.standard_normal(spec.n_samples)
    return DesignMatrix.from_features(X, y)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def split(data: DesignMatrix, spec: SplitSpec):
    """Seeded shuffle, then the first ``floor(fraction * N)`` rows train."""
    if data.n < 2:
        raise TooFewRows("need at least 2 rows to split")
    order = np.random.default_rng(spec.seed).permutation(data.n)
    cut = int(math.floor(spec.train_fraction * data.n))
    return data.take(order[:cut]), data.take(order[cut:])


def load_csv(path, target=-1, header=True) -> DesignMatrix:
    """Read a numeric CSV; ``target`` is a column name (needs a header) or index.

    Parameters
    ----------
    path : str, path-like or text stream
    target : str or int
        Target column. Negative indices count from the right.
    header : bool
        Whether the first line holds column names.
    """
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    names = None
    first_line = 1
    if header:
        if not rows:
            raise MissingTarget("file is empty")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    width = len(names) if names is not None else (len(rows[0]) if rows else 0)
    if isinstance(target, str) and names is not None and target in names:
        col = names.index(target)
    elif isinstance(target, str) and not target.lstrip("-").isdigit():
        if names is None:
            raise MissingTarget(f"target {target!r} given by name but the file has no header")
        raise MissingTarget(f"no column named {target!r} (columns: {', '.join(names)})")
    else:
        col = int(target)
        if not -width <= col < width:
            raise MissingTarget(f"target index {col} out of range for {width} columns")
        col %= width
    if width < 2:
        raise MissingTarget("need at least one feature column besides the target")

    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise RaggedRows(f"line {line} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(line, j + 1, f"cannot parse {cell!r} as a number") from None
            if not math.isfinite(values[i, j]):
                raise ParseError(line, j + 1, f"non-finite value {cell!r}")
    features = np.delete(values, col, axis=1)
    return DesignMatrix.from_features(features, values[:, col])


def to_csv(data: DesignMatrix, out=None, names=None):
    """Write features then target, with a header; returns the text if ``out`` is None."""
    names = names or [f"x{i + 1}" for i in range(data.d)] + ["y"]
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row, target in zip(data.features, data.y):
        buf.write(",".join(repr(float(v)) for v in (*row, target)) + "\n")
    text = buf.getvalue()
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return None

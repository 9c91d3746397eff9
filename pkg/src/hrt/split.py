"""Node-level fitting of one oblique hinge split.

A split is a pair of affine predictors ``theta1``, ``theta2`` combined by
``max`` or ``min``. Rows are partitioned by which predictor is active, each
side is refit by ridge least squares, and the parameters move toward those
fits by a damped step. Within a fixed partition the objective is quadratic
and its Hessian is block diagonal ``diag(X1^T X1, X2^T X2)``, so the step
``theta_ols - theta`` is exactly the Newton direction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import AutoStep, FixedStep, HrtConfig, StepPolicy
from .errors import (
    DegenerateBlock,
    DimensionMismatch,
    EmptyPartitionSide,
    NoDescent,
    SingularSystem,
    TooFewSamples,
    Unsplittable,
)
from .linalg import DesignMatrix, ridge_arrays

DIVERSITY_TOL = 1e-8
CORNER_OFFSET = 1e-3
PERTURB_SCALE = 1e-2


class HingeKind(enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True, eq=False)
class SplitParams:
    theta1: np.ndarray
    theta2: np.ndarray
    kind: HingeKind = HingeKind.MAX

    def __post_init__(self):
        t1 = np.array(self.theta1, dtype=np.float64).reshape(-1)
        t2 = np.array(self.theta2, dtype=np.float64).reshape(-1)
        if t1.shape != t2.shape:
            raise DimensionMismatch(f"theta1 {t1.shape} and theta2 {t2.shape} differ")
        if not (np.all(np.isfinite(t1)) and np.all(np.isfinite(t2))):
            raise ValueError("split coefficients must be finite")
        if np.array_equal(t1, t2):
            raise ValueError("theta1 and theta2 must differ")
        t1.flags.writeable = False
        t2.flags.writeable = False
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)
        object.__setattr__(self, "kind", HingeKind(self.kind))

    @property
    def d(self):
        return self.theta1.shape[0] - 1

    def stacked(self):
        return np.concatenate([self.theta1, self.theta2])

    def __eq__(self, other):
        if not isinstance(other, SplitParams):
            return NotImplemented
        return (
            self.kind is other.kind
            and np.array_equal(self.theta1, other.theta1)
            and np.array_equal(self.theta2, other.theta2)
        )


@dataclass(frozen=True, eq=False)
class Partition:
    s1_indices: np.ndarray
    s2_indices: np.ndarray

    @classmethod
    def from_mask(cls, mask):
        return cls(np.flatnonzero(mask), np.flatnonzero(~mask))

    @property
    def sizes(self):
        return len(self.s1_indices), len(self.s2_indices)


@dataclass(frozen=True, eq=False)
class SplitOutcome:
    params: SplitParams
    converged: bool
    used_fallback: bool
    iterations: int
    objective_trace: tuple
    final_rmse: float


# -- evaluation primitives ----------------------------------------------------


def side_mask(a, b, kind):
    """Rows in S1: ``a >= b`` for max, ``a <= b`` for min. Ties go to S1."""
    return a >= b if kind is HingeKind.MAX else a <= b


def hinge_value(a, b, kind):
    """Active branch value; equals ``max(a, b)`` or ``min(a, b)``."""
    return np.where(side_mask(a, b, kind), a, b)


def relu(u):
    return np.maximum(u, 0.0)


def _check(node, p):
    if p.theta1.shape[0] != node.Xa.shape[1]:
        raise DimensionMismatch(
            f"split has d={p.d} but node has d={node.d}"
        )


def _objective(Xa, y, t1, t2, kind):
    r = y - hinge_value(Xa @ t1, Xa @ t2, kind)
    return 0.5 * float(r @ r)


def _mask(Xa, t1, t2, kind):
    return side_mask(Xa @ t1, Xa @ t2, kind)


def _block_fits(Xa, y, mask, alpha):
    try:
        return ridge_arrays(Xa[mask], y[mask], alpha), ridge_arrays(Xa[~mask], y[~mask], alpha)
    except SingularSystem as exc:
        raise DegenerateBlock(str(exc)) from None


def partition(node: DesignMatrix, p: SplitParams) -> Partition:
    _check(node, p)
    return Partition.from_mask(_mask(node.Xa, p.theta1, p.theta2, p.kind))


def objective_v(node: DesignMatrix, p: SplitParams) -> float:
    """Half the squared error of the hinge model on the node."""
    _check(node, p)
    return _objective(node.Xa, node.y, p.theta1, p.theta2, p.kind)


def node_rmse(node: DesignMatrix, p: SplitParams) -> float:
    return float(np.sqrt(2.0 * objective_v(node, p) / node.n))


def gradient_v(node: DesignMatrix, p: SplitParams) -> np.ndarray:
    """Stacked block gradient over the partition induced by ``p``.

    On the hinge boundary the tie rule decides the side, so this is the
    one-sided gradient there.
    """
    _check(node, p)
    Xa, y = node.Xa, node.y
    mask = _mask(Xa, p.theta1, p.theta2, p.kind)
    X1, X2 = Xa[mask], Xa[~mask]
    g1 = -X1.T @ (y[mask] - X1 @ p.theta1)
    g2 = -X2.T @ (y[~mask] - X2 @ p.theta2)
    return np.concatenate([g1, g2])


def newton_direction(node: DesignMatrix, p: SplitParams, alpha: float = 0.0) -> np.ndarray:
    """Per-block ridge fit minus current parameters, stacked."""
    _check(node, p)
    mask = _mask(node.Xa, p.theta1, p.theta2, p.kind)
    if mask.all() or not mask.any():
        raise EmptyPartitionSide(f"partition sizes {int(mask.sum())}/{int((~mask).sum())}")
    o1, o2 = _block_fits(node.Xa, node.y, mask, alpha)
    return np.concatenate([o1 - p.theta1, o2 - p.theta2])


def _valid(mask):
    return mask.any() and not mask.all()


def newton_step(node: DesignMatrix, p: SplitParams, policy: StepPolicy, alpha: float = 0.0):
    """One damped Newton update. Returns ``(new_params, accepted_mu)``.

    A fixed policy always takes ``theta + mu * direction``. The automatic
    policy returns the first trial ``mu0 * beta**t`` that keeps both sides
    nonempty and strictly lowers the node objective, else raises NoDescent.
    """
    direction = newton_direction(node, p, alpha)
    k = p.d + 1
    d1, d2 = direction[:k], direction[k:]
    if isinstance(policy, FixedStep):
        mu = policy.mu
        return SplitParams(p.theta1 + mu * d1, p.theta2 + mu * d2, p.kind), mu
    Xa, y = node.Xa, node.y
    v0 = _objective(Xa, y, p.theta1, p.theta2, p.kind)
    for t in range(policy.max_backtracks + 1):
        mu = policy.mu0 * policy.beta**t
        n1, n2 = p.theta1 + mu * d1, p.theta2 + mu * d2
        if not _valid(_mask(Xa, n1, n2, p.kind)):
            continue
        if _objective(Xa, y, n1, n2, p.kind) < v0:
            return SplitParams(n1, n2, p.kind), mu
    raise NoDescent(f"no decrease after {policy.max_backtracks} backtracks")


# -- initialization and fallback ----------------------------------------------


def _perturb(rng, theta):
    return theta + rng.normal(size=theta.shape) * PERTURB_SCALE * (1.0 + np.abs(theta))


def _global_fit(Xa, y, alpha):
    try:
        return ridge_arrays(Xa, y, alpha)
    except SingularSystem:
        theta = np.zeros(Xa.shape[1])
        theta[-1] = float(np.mean(y))
        return theta


def _through(point, t1, t2):
    """Shift both biases so the two planes meet at ``point``."""
    gap = float(point @ (t1 - t2))
    t1, t2 = t1.copy(), t2.copy()
    t1[-1] -= 0.5 * gap
    t2[-1] += 0.5 * gap
    return t1, t2


def initialize_params(node: DesignMatrix, alpha: float = 0.0, rng_seed=0) -> dict:
    """Starting pair for each hinge kind.

    Splits the node at the median of its widest feature, ridge-fits each
    half. When the median split is degenerate (a half with fewer than two
    rows or a singular fit), two random perturbations of the global fit are
    used instead. Nearly identical pairs are perturbed again. Whenever some
    feature varies, the two biases are then shifted so the planes meet at
    the median pivot (the node centroid with the widest feature set to its
    median).
    """
    if node.n < 2:
        raise TooFewSamples(f"need at least 2 rows to initialize a split, got {node.n}")
    rng = np.random.default_rng(rng_seed)
    Xa, y = node.Xa, node.y
    pair = pivot = None
    if node.d > 0:
        spread = np.ptp(node.features, axis=0)
        k = int(np.argmax(spread))
        if spread[k] > 0:
            column = node.features[:, k]
            pivot = np.append(node.features.mean(axis=0), 1.0)
            pivot[k] = np.median(column)
            lower = column <= pivot[k]
            if lower.sum() >= 2 and (~lower).sum() >= 2:
                try:
                    pair = _block_fits(Xa, y, lower, alpha)
                except DegenerateBlock:
                    pair = None
    if pair is None:
        base = _global_fit(Xa, y, alpha)
        pair = (_perturb(rng, base), _perturb(rng, base))
    t1, t2 = (np.array(t, dtype=np.float64) for t in pair)
    if pivot is not None:
        # raw fits can cross far outside the node, so pin the starting
        # hyperplane to the median pivot
        t1, t2 = _through(pivot, t1, t2)
    if np.max(np.abs(t1 - t2)) < DIVERSITY_TOL:
        t1, t2 = _perturb(rng, t1), _perturb(rng, t2)
        if pivot is not None:
            t1, t2 = _through(pivot, t1, t2)
        if np.max(np.abs(t1 - t2)) < DIVERSITY_TOL:
            t1[0] += CORNER_OFFSET
    return {kind: SplitParams(t1, t2, kind) for kind in HingeKind}


def fallback_split(node: DesignMatrix, rng_seed=0, feature=None) -> SplitParams:
    """Axis-aligned median split encoded as a hinge.

    Draws a feature uniformly (or uses ``feature``), re-drawing among
    non-constant features if the draw is constant. Rows with
    ``x_k >= median`` land on the S1 side. ``theta2`` is zero and
    ``theta1 = e_k - median * e_bias``, so the routing score is the exact
    floating-point difference ``x_k - median``.
    """
    if node.n < 2:
        raise TooFewSamples(f"need at least 2 rows to split, got {node.n}")
    F = node.features
    varying = np.flatnonzero(np.ptp(F, axis=0) > 0) if node.d else np.array([], dtype=int)
    if varying.size == 0:
        raise Unsplittable("all features are constant")
    rng = np.random.default_rng(rng_seed)
    k = int(rng.integers(node.d)) if feature is None else int(feature)
    if k not in varying:
        k = int(rng.choice(varying))
    m = float(np.median(F[:, k]))
    theta1 = np.zeros(node.d + 1)
    theta1[k] = 1.0
    theta1[-1] = -m
    return SplitParams(theta1, np.zeros(node.d + 1), HingeKind.MAX)


# -- iteration ------------------------------------------------------------------


def find_optimal_split(node: DesignMatrix, kind: HingeKind, cfg: HrtConfig, rng_seed=None, init=None):
    """Alternate partitioning and damped Newton steps for one hinge kind.

    Stops when the parameter change drops below ``cfg.epsilon`` or when the
    partition is unchanged across a step; in the latter case the iterate is
    refreshed to the per-side fits of the stable partition when those fits
    induce that same partition (under the automatic policy only if that also
    lowers the objective). Running out of
    ``t_max`` iterations, emptying a side, or a failed line search leaves
    ``converged=False``.
    """
    kind = HingeKind(kind)
    if init is None:
        seed = cfg.seed if rng_seed is None else rng_seed
        init = initialize_params(node, cfg.ridge_alpha, seed)[kind]
    elif init.kind is not kind:
        init = SplitParams(init.theta1, init.theta2, kind)
    _check(node, init)

    Xa, y, alpha = node.Xa, node.y, cfg.ridge_alpha
    policy = cfg.step_policy
    auto = isinstance(policy, AutoStep)
    t1, t2 = init.theta1.copy(), init.theta2.copy()
    mask = _mask(Xa, t1, t2, kind)
    v = _objective(Xa, y, t1, t2, kind)
    trace = [v]
    iterations = 0
    converged = False

    for _ in range(cfg.t_max):
        if not _valid(mask):
            break
        try:
            o1, o2 = _block_fits(Xa, y, mask, alpha)
        except DegenerateBlock:
            break
        d1, d2 = o1 - t1, o2 - t2
        if auto:
            if np.linalg.norm(d1) + np.linalg.norm(d2) < cfg.epsilon:
                converged = True
                break
            accepted = None
            for t in range(policy.max_backtracks + 1):
                mu = policy.mu0 * policy.beta**t
                n1, n2 = t1 + mu * d1, t2 + mu * d2
                nmask = _mask(Xa, n1, n2, kind)
                if not _valid(nmask):
                    continue
                nv = _objective(Xa, y, n1, n2, kind)
                if nv < v:
                    accepted = mu
                    break
            if accepted is None:
                break
        else:
            mu = policy.mu
            n1, n2 = t1 + mu * d1, t2 + mu * d2
            nmask = _mask(Xa, n1, n2, kind)
            if not _valid(nmask):
                break
            nv = _objective(Xa, y, n1, n2, kind)

        change = np.linalg.norm(n1 - t1) + np.linalg.norm(n2 - t2)
        t1, t2, v = n1, n2, nv
        iterations += 1
        trace.append(v)
        if change < cfg.epsilon:
            converged = True
            break
        if np.array_equal(nmask, mask):
            if mu != 1.0:
                # same partition, so (o1, o2) are its per-side fits
                # only a fixed point if the fits keep their own partition
                if np.array_equal(_mask(Xa, o1, o2, kind), mask):
                    rv = _objective(Xa, y, o1, o2, kind)
                    if not auto or rv < v:
                        t1, t2, v = o1, o2, rv
                        iterations += 1
                        trace.append(v)
            converged = True
            break
        mask = nmask

    params = SplitParams(t1, t2, kind)
    return SplitOutcome(
        params=params,
        converged=converged,
        used_fallback=False,
        iterations=iterations,
        objective_trace=tuple(trace),
        final_rmse=float(np.sqrt(2.0 * v / node.n)),
    )


def select_split(node: DesignMatrix, cfg: HrtConfig, rng_seed=None) -> SplitOutcome:
    """Fit both hinge kinds from the same start and keep the lower node RMSE.

    An exact tie keeps the max kind.
    """
    seed = cfg.seed if rng_seed is None else rng_seed
    starts = initialize_params(node, cfg.ridge_alpha, seed)
    best_max = find_optimal_split(node, HingeKind.MAX, cfg, init=starts[HingeKind.MAX])
    best_min = find_optimal_split(node, HingeKind.MIN, cfg, init=starts[HingeKind.MIN])
    if node_rmse(node, best_min.params) < node_rmse(node, best_max.params):
        return best_min
    return best_max

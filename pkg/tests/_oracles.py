"""Independent reference implementations and data generators shared by tests."""

import numpy as np

from hrt.tree import Internal, Leaf


def ols_half_sse(x, y):
    A = np.c_[x, np.ones(len(x))]
    theta = np.linalg.lstsq(A, y, rcond=None)[0]
    r = y - A @ theta
    return 0.5 * float(r @ r)


def best_threshold_objective(x, y):
    """Smallest per-side OLS objective over all N-1 cuts of the sorted 1-D sample."""
    order = np.argsort(x, kind="stable")
    x, y = np.asarray(x)[order], np.asarray(y)[order]
    return min(ols_half_sse(x[:c], y[:c]) + ols_half_sse(x[c:], y[c:]) for c in range(1, len(x)))


def random_single_hinge(rng, d, n):
    """Features in [-1, 1]^d and targets from a random max or min hinge."""
    X = rng.uniform(-1, 1, size=(n, d))
    y, kind = _hinge_on(rng, X)
    return X, y, kind


def depth2_instance(rng, n=400, d=2, gap=0.1, steep=20.0):
    """Noiseless data from a depth-2 generating tree.

    The root hyperplane ``w.x = b`` has an empty margin of half-width ``gap``
    and a V-shaped ridge of slope ``steep`` across it; each side adds its own
    random single hinge. The steep ridge keeps the root crease inside the
    margin, after which every child is exactly one hinge.
    """
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    b = rng.uniform(-0.3, 0.3)
    X = rng.uniform(-1, 1, size=(6 * n, d))
    X = X[np.abs(X @ w - b) > gap][:n]
    s = X @ w - b
    left = s < 0
    y = steep * np.abs(s)
    for side in (left, ~left):
        y[side] += _hinge_on(rng, X[side])[0]
    return X, y


def _hinge_on(rng, X, min_share=0.2):
    """Random hinge on rows of X whose crease leaves >= min_share on each side."""
    n, d = X.shape
    Xa = np.c_[X, np.ones(n)]
    while True:
        t1, t2 = rng.normal(size=d + 1), rng.normal(size=d + 1)
        share = np.mean(Xa @ t1 >= Xa @ t2)
        if min_share <= share <= 1 - min_share:
            break
    kind = "max" if rng.random() < 0.5 else "min"
    f = np.maximum if kind == "max" else np.minimum
    return f(Xa @ t1, Xa @ t2), kind


def naive_predict(model, X):
    """Row-by-row tree walk using plain Python arithmetic."""
    out = []
    for row in np.asarray(X, dtype=float):
        xa = list(row) + [1.0]
        node = model.root
        while isinstance(node, Internal):
            a = sum(u * v for u, v in zip(xa, node.split.theta1))
            b = sum(u * v for u, v in zip(xa, node.split.theta2))
            node = node.left if a >= b else node.right
        assert isinstance(node, Leaf)
        out.append(sum(u * v for u, v in zip(xa, node.theta)))
    return np.array(out)

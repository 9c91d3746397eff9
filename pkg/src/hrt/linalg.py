"""Normal-equation solvers for augmented design matrices.

Every coefficient vector in this package has length ``d + 1``: one weight per
feature followed by the bias, matching rows ``[x_1, ..., x_d, 1]``. The ridge
penalty never touches the bias coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, SingularSystem

# squared Cholesky pivot relative to the largest diagonal entry of A
PIVOT_RTOL = 1e-12
JITTER_SCALE = 1e-8


def augment(X):
    """Append a trailing column of ones to a feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Augmented rows ``Xa`` (N x (d+1), last column exactly 1) and targets ``y``."""

    Xa: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        Xa = np.array(self.Xa, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if Xa.ndim != 2 or Xa.shape[1] < 1:
            raise DimensionMismatch(f"augmented matrix must be 2-D, got shape {Xa.shape}")
        if Xa.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{Xa.shape[0]} rows but {y.shape[0]} targets")
        if Xa.shape[0] and not np.all(Xa[:, -1] == 1.0):
            raise DimensionMismatch("last column of an augmented matrix must be 1")
        Xa.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "Xa", Xa)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_features(cls, X, y):
        return cls(augment(X), y)

    @property
    def n(self):
        return self.Xa.shape[0]

    @property
    def d(self):
        return self.Xa.shape[1] - 1

    @property
    def features(self):
        return self.Xa[:, :-1]

    def take(self, index):
        return DesignMatrix(self.Xa[index], self.y[index])

    def __len__(self):
        return self.n


def _penalty_mask(p):
    mask = np.ones(p)
    mask[-1] = 0.0
    return mask


def spd_solve(A, b):
    """Solve ``A x = b`` for symmetric positive definite ``A`` by Cholesky.

    Raises
    ------
    NotPositiveDefinite
        If factorization fails or a squared pivot falls below
        ``PIVOT_RTOL`` times the largest diagonal entry.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"cannot solve system with A{A.shape}, b{b.shape}")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(L) ** 2
    scale = np.max(np.abs(np.diag(A)))
    if not np.all(np.isfinite(L)) or scale <= 0 or np.min(pivots) <= PIVOT_RTOL * scale:
        raise NotPositiveDefinite("Cholesky pivot below tolerance")
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def ridge_from_gram(G, rhs, alpha):
    """Ridge solution from precomputed ``G = X^T X`` and ``rhs = X^T y``.

    Tries ``G + alpha*I0`` first; on failure retries once with a jitter of
    ``1e-8 * trace(G) / (d+1)`` on the non-bias diagonal.
    """
    p = G.shape[0]
    mask = _penalty_mask(p)
    A = G + alpha * np.diag(mask)
    try:
        return spd_solve(A, rhs)
    except NotPositiveDefinite:
        pass
    jitter = JITTER_SCALE * np.trace(G) / p
    try:
        return spd_solve(A + jitter * np.diag(mask), rhs)
    except NotPositiveDefinite:
        raise SingularSystem(
            f"normal matrix is not positive definite (alpha={alpha}, jitter={jitter:g})"
        ) from None


def ridge_arrays(Xa, y, alpha):
    """``solve_ridge`` on raw arrays, without building a DesignMatrix."""
    if Xa.shape[0] == 0:
        raise SingularSystem("cannot fit an empty block")
    G = Xa.T @ Xa
    rhs = Xa.T @ y
    if Xa.shape[0] < Xa.shape[1]:
        # undersized block: enforce a minimum ridge so the system stays solvable
        alpha = max(alpha, JITTER_SCALE * np.trace(G) / Xa.shape[1])
    return ridge_from_gram(G, rhs, alpha)


def solve_ridge(m: DesignMatrix, alpha: float = 0.0) -> np.ndarray:
    """Minimize ``0.5*||y - Xa theta||^2 + 0.5*alpha*||w||^2`` with the bias unpenalized.

    Parameters
    ----------
    m : DesignMatrix
        Node data with at least one row.
    alpha : float
        Ridge strength, ``alpha >= 0``. With ``alpha = 0`` and a full-rank
        Gram matrix this is ordinary least squares.

    Returns
    -------
    theta : ndarray of shape (d+1,)
    """
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    if m.n == 0:
        raise SingularSystem("cannot fit an empty design matrix")
    return ridge_from_gram(m.Xa.T @ m.Xa, m.Xa.T @ m.y, alpha)


def objective_sse(m: DesignMatrix, theta) -> float:
    """Half the residual sum of squares of ``theta`` on ``m``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (m.d + 1,):
        raise DimensionMismatch(f"theta has shape {theta.shape}, expected ({m.d + 1},)")
    r = m.y - m.Xa @ theta
    return 0.5 * float(r @ r)

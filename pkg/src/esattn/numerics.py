"""Dense-matrix numerics: stable per-column softmax, population statistics,
and KL divergence with an exact infinity convention.

Every attention map in this package is column-stochastic: each key column is
a probability distribution over query tokens, normalised independently of
the other columns.  All reductions go through numpy's pairwise summation (or
``math.fsum`` where an independent check is wanted), which keeps the 1e-12
sum tolerances valid up to columns of ~10**6 tokens.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError

INFINITE_KL = math.inf
"""Distinguished return value of :func:`kl_divergence` on disjoint support.

It is produced explicitly from the zero-support convention, never as a
floating-point overflow artifact, so callers may assert ``math.isinf(x)``
exactly.
"""


def validate_logits(logits) -> np.ndarray:
    """Coerce ``logits`` to a 2-D float64 matrix and check its invariants.

    Entries must be finite: the +infinity of hard modulation is represented
    by :class:`esattn.attention.HardLimitForm`, never stored in a logit
    matrix.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"logits must be a 2-D matrix with nonzero dims, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError("logit entries must be finite")
    return arr


def validate_prob_column(p, *, tol: float = 1e-12) -> np.ndarray:
    """Coerce ``p`` to a 1-D probability vector: entries in [0, 1], sum 1."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"probability column must be 1-D and nonempty, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("probability entries must lie in [0, 1]")
    total = math.fsum(arr.tolist())
    if abs(total - 1.0) > tol:
        raise DomainError(f"probability column sums to {total!r}, expected 1 within {tol}")
    return arr


def column_softmax(logits, j: int) -> np.ndarray:
    """Softmax of column ``j`` over the query axis (the per-key convention).

    Computed in the shifted form exp(S_ij - m) / sum_i exp(S_ij - m) with
    m = max_i S_ij, so arbitrarily large finite logits cannot overflow.
    """
    arr = validate_logits(logits)
    if not 0 <= j < arr.shape[1]:
        raise IndexError(f"column {j} out of range for {arr.shape[1]} key columns")
    col = arr[:, j]
    e = np.exp(col - col.max())
    return e / e.sum()


def columnwise_softmax(logits) -> np.ndarray:
    """Apply :func:`column_softmax` to every column at once."""
    arr = validate_logits(logits)
    e = np.exp(arr - arr.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def population_std(values) -> float:
    """Standard deviation with the population (divide-by-N) convention."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DomainError("population_std requires at least one value")
    return float(np.sqrt(np.mean((arr - arr.mean()) ** 2)))


def kl_divergence(p, q) -> float:
    """KL divergence sum_i p_i log(p_i / q_i) between probability columns.

    Conventions: 0 * log(0 / q) = 0, and any index with p_i > 0 but q_i = 0
    yields :data:`INFINITE_KL`.  ``q`` may contain exact zeros (a hard-limit
    column does); ``p`` and ``q`` must otherwise be valid probability
    columns of equal length.
    """
    p = validate_prob_column(p)
    q = validate_prob_column(q)
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    support = p > 0.0
    if np.any(q[support] == 0.0):
        return INFINITE_KL
    ps = p[support]
    return float(np.sum(ps * (np.log(ps) - np.log(q[support]))))


def softmax_jacobian(prob_column) -> np.ndarray:
    """Analytic Jacobian diag(a) - a a^T of softmax at output ``a``.

    ``prob_column`` is the softmax output, not the logits; the Jacobian of a
    per-column softmax with respect to that column's logits depends only on
    the output distribution.
    """
    a = validate_prob_column(prob_column)
    return np.diag(a) - np.outer(a, a)

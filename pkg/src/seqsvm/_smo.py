"""Shared plumbing for the pairwise dual solvers.

Both dual problems share the constraint set {Σα = 1, 0 ≤ αᵢ ≤ 1/(nλ)} and
are minimized by exact coordinate-pair descent.  One sweep visits the
even-offset adjacent pairs (0,1), (2,3), ..., the odd-offset pairs
(1,2), (3,4), ..., and then every longer-stride pair (i, i+s) for
s = 2..n-1.  Adjacent pairs alone can stall when an in-between multiplier
sits on a box bound and blocks the mass relay, so a sweep must cover all
pairs for pairwise descent to reach the constrained minimum.
"""

import numpy as np

from . import kernels
from .errors import ValidationError

GRAM_SYMMETRY_TOL = 1e-10


def check_gram(gram: np.ndarray, n: int | None = None) -> np.ndarray:
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValidationError(f"gram matrix must be square, got {gram.shape}")
    if n is not None and gram.shape[0] != n:
        raise ValidationError(f"gram is {gram.shape[0]}x{gram.shape[0]}, expected n={n}")
    skew = np.max(np.abs(gram - gram.T)) if gram.size else 0.0
    if skew > GRAM_SYMMETRY_TOL * max(1.0, float(np.max(np.abs(gram))) if gram.size else 1.0):
        raise ValidationError(f"gram matrix is asymmetric (max |K - K^T| = {skew:.3e})")
    return gram


def pair_order(n: int) -> np.ndarray:
    """Deterministic complete pair schedule for one sweep over n multipliers."""
    pairs = [(a, a + 1) for a in range(0, n - 1, 2)]
    pairs += [(a, a + 1) for a in range(1, n - 1, 2)]
    for stride in range(2, n):
        pairs += [(a, a + stride) for a in range(n - stride)]
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def sweep(alpha: np.ndarray, gram: np.ndarray, upper: float, sphere_form: bool,
          pairs: np.ndarray | None = None) -> np.ndarray:
    """One full sweep of pair updates; returns a new multiplier vector."""
    out = np.ascontiguousarray(alpha, dtype=float).copy()
    if pairs is None:
        pairs = pair_order(out.shape[0])
    if pairs.size:
        kernels.smo_apply_pairs(out, np.ascontiguousarray(gram, dtype=float),
                                float(upper), pairs, sphere_form)
    return out


def solve(alpha: np.ndarray, gram: np.ndarray, upper: float, sphere_form: bool,
          objective, epsilon: float, max_sweeps: int):
    """Sweep until the per-sweep objective decrease drops below epsilon.

    Returns (alpha, converged, sweeps_used).  ``objective`` maps a
    multiplier vector to the dual value being minimized.
    """
    current = np.ascontiguousarray(alpha, dtype=float).copy()
    value = objective(current)
    for it in range(1, max_sweeps + 1):
        nxt = sweep(current, gram, upper, sphere_form)
        nxt_value = objective(nxt)
        decrease = value - nxt_value
        current, value = nxt, nxt_value
        if decrease < epsilon:
            return current, True, it
    return current, False, max_sweeps

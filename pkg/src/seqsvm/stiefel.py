"""Orthogonality-preserving updates via the Cayley transform.

Weight blocks live on the manifold of matrices with orthonormal columns
(unit vectors being the one-column case).  A gradient step is taken as

    A  = G Wᵀ − W Gᵀ
    W' = (I + (μ/2) A)⁻¹ (I − (μ/2) A) W

which keeps Wᵀ W = I exactly in real arithmetic because the update
factor is orthogonal for skew-symmetric A.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import StepFailureError

# Drift beyond this triggers a fresh orthonormal factorization of the result.
REORTH_THRESHOLD = 1e-8


def orthogonality_error(w: np.ndarray) -> float:
    """Frobenius norm of WᵀW − I for a matrix (or unit-norm defect for a vector)."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1)
    gram = w.T @ w
    return float(np.linalg.norm(gram - np.eye(w.shape[1])))


@dataclass(frozen=True)
class ManifoldPoint:
    """A matrix with (approximately) orthonormal columns."""

    value: np.ndarray          # (r, c) with r >= c
    tolerance: float = field(default=1e-8)

    def __post_init__(self):
        v = np.asarray(self.value, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] < v.shape[1]:
            raise ValueError(f"manifold point must be r x c with r >= c, got {v.shape}")
        object.__setattr__(self, "value", v)
        err = orthogonality_error(v)
        if not err <= self.tolerance:
            raise ValueError(
                f"columns not orthonormal: error {err:.3e} exceeds tolerance {self.tolerance:.1e}"
            )


def _orthonormalize(w: np.ndarray) -> np.ndarray:
    """Nearest-ish orthonormal basis via QR with a sign-fixed diagonal."""
    q, r = np.linalg.qr(w)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def init_orthogonal(rows: int, cols: int, seed: int) -> ManifoldPoint:
    """Seeded random matrix with orthonormal columns.

    Drawn as the orthogonal factor of a Gaussian matrix, with column signs
    pinned so the result is deterministic.
    """
    if rows < cols or cols < 1:
        raise ValueError(f"need rows >= cols >= 1, got {rows}x{cols}")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((rows, cols))
    return ManifoldPoint(_orthonormalize(gauss))


def cayley_update(value: np.ndarray, grad: np.ndarray, mu: float) -> np.ndarray:
    """Array-level Cayley step handling vectors and wide matrices.

    One-dimensional inputs are treated as single columns; blocks with more
    columns than rows are updated through their transpose, which places the
    orthonormality constraint on the short dimension.
    """
    value = np.asarray(value, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if value.shape != grad.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {value.shape}")
    if value.ndim == 1:
        return _cayley_core(value.reshape(-1, 1), grad.reshape(-1, 1), mu).ravel()
    if value.shape[0] < value.shape[1]:
        return _cayley_core(value.T, grad.T, mu).T
    return _cayley_core(value, grad, mu)


def _cayley_core(w: np.ndarray, g: np.ndarray, mu: float) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise StepFailureError("gradient contains non-finite entries")
    r = w.shape[0]
    a = g @ w.T - w @ g.T
    half = 0.5 * mu
    eye = np.eye(r)
    try:
        new = np.linalg.solve(eye + half * a, (eye - half * a) @ w)
    except np.linalg.LinAlgError as exc:
        raise StepFailureError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(new)):
        raise StepFailureError("update produced non-finite entries")
    if orthogonality_error(new) > REORTH_THRESHOLD:
        new = _orthonormalize(new)
    return new


def cayley_step(point: ManifoldPoint, grad: np.ndarray, mu: float) -> ManifoldPoint:
    """One orthogonality-preserving gradient step from ``point``."""
    grad = np.asarray(grad, dtype=float)
    if grad.ndim == 1:
        grad = grad.reshape(-1, 1)
    new = cayley_update(point.value, grad, mu)
    return ManifoldPoint(new, tolerance=max(point.tolerance, 1e-10))

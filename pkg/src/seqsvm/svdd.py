"""Hypersphere one-class head: smooth primal, dual solver, and scoring.

The detector encloses embeddings in a sphere with center ``c`` and squared
radius ``r2``.  With psi(h) = ||h - c||^2 - r2, training minimizes

    F_tau(c, r2) = r2 + (1/(n*lam)) * sum_i S_tau(psi(h_i))

and the matching dual is

    min a^T K a - sum_i a_i K_ii   s.t.  sum a = 1,  0 <= a_i <= 1/(n*lam).

r2 (not the radius) is the optimization variable and is clamped to stay
non-negative after unconstrained gradient steps.
"""

from dataclasses import dataclass

import numpy as np

from . import _smo
from .errors import NoMarginVectorError
from .ocsvm import DualSolution, SmoothingConfig, hinge, sigmoid, smooth_hinge


@dataclass
class SphereModel:
    center: np.ndarray
    r_squared: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).ravel()
        self.r_squared = float(self.r_squared)
        if not (np.all(np.isfinite(self.center)) and np.isfinite(self.r_squared)):
            raise ValueError("model parameters must be finite")
        if self.r_squared < 0.0:
            raise ValueError(f"squared radius must be non-negative, got {self.r_squared}")


def psi(h_bar, model: SphereModel):
    """Squared distance to the center minus the squared radius."""
    h = np.asarray(h_bar, dtype=float)
    if h.ndim == 1:
        diff = h - model.center
        return float(diff @ diff - model.r_squared)
    diff = h - model.center[None, :]
    return np.einsum("ij,ij->i", diff, diff) - model.r_squared


def _as_matrix(embeddings) -> np.ndarray:
    h = np.asarray(embeddings, dtype=float)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValueError("embeddings must be a non-empty (n, m) matrix")
    return h


def primal_objective(model: SphereModel, embeddings, cfg: SmoothingConfig) -> float:
    """Smoothed primal value F_tau."""
    h = _as_matrix(embeddings)
    n = h.shape[0]
    penalty = smooth_hinge(psi(h, model), cfg.tau).sum() / (n * cfg.lam)
    return float(model.r_squared + penalty)


def primal_objective_exact(model: SphereModel, embeddings, lam: float) -> float:
    """Exact-hinge primal value F."""
    h = _as_matrix(embeddings)
    n = h.shape[0]
    return float(model.r_squared + hinge(psi(h, model)).sum() / (n * lam))


def primal_gradients(model: SphereModel, embeddings, cfg: SmoothingConfig):
    """Gradients of F_tau plus per-item upstream vectors for the encoder."""
    h = _as_matrix(embeddings)
    n = h.shape[0]
    scale = 1.0 / (n * cfg.lam)
    sig = sigmoid(cfg.tau * psi(h, model))
    diff = model.center[None, :] - h
    grad_center = 2.0 * scale * (sig @ diff)
    grad_r_squared = 1.0 - scale * sig.sum()
    upstreams = (-2.0 * scale) * sig[:, None] * diff
    return grad_center, float(grad_r_squared), upstreams


def sphere_margin(model: SphereModel, h_bar):
    """Real-valued margin r2 - ||h - c||^2 (positive = inside)."""
    value = psi(h_bar, model)
    return -value if np.ndim(value) else -float(value)


def score_sphere(model: SphereModel, h_bar):
    """Sign of the margin; points on the sphere count as nominal (+1)."""
    margin = sphere_margin(model, h_bar)
    if np.ndim(margin) == 0:
        return 1 if margin >= 0.0 else -1
    return np.where(margin >= 0.0, 1, -1)


def dual_objective(dual: DualSolution, gram) -> float:
    """a^T K a - sum_i a_i K_ii."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    return float(dual.alpha @ gram @ dual.alpha - dual.alpha @ np.diag(gram))


def smo_sweep(dual: DualSolution, gram) -> DualSolution:
    """One deterministic sweep of exact pair updates on the sphere dual."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    alpha = _smo.sweep(dual.alpha, gram, dual.upper, sphere_form=True)
    return DualSolution(alpha, dual.lam)


def smo_solve(dual: DualSolution, gram, epsilon: float = 1e-12,
              max_sweeps: int = 10000):
    """Sweep to convergence; returns (DualSolution, converged, sweeps)."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    diag = np.diag(gram).copy()

    def value(a):
        return a @ gram @ a - a @ diag

    alpha, converged, used = _smo.solve(dual.alpha, gram, dual.upper,
                                        True, value, epsilon, max_sweeps)
    return DualSolution(alpha, dual.lam), converged, used


def recover_r_squared(dual: DualSolution, gram) -> float:
    """Squared radius from margin multipliers.

    Each interior i sits on the sphere, so K_ii - 2 (K a)_i + a^T K a is its
    squared distance to the dual center; the mean over interior rows is
    returned.
    """
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    interior = dual.interior_indices()
    if interior.size == 0:
        raise NoMarginVectorError(
            "no multiplier is strictly inside the box; cannot recover the radius")
    ka = gram @ dual.alpha
    quad = float(dual.alpha @ ka)
    rows = np.diag(gram)[interior] - 2.0 * ka[interior] + quad
    return float(rows.mean())


def dual_margin(dual: DualSolution, r_squared: float, gram, gram_row, self_k: float) -> float:
    """Margin of a test item expressed purely through inner products."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    gram_row = np.asarray(gram_row, dtype=float)
    quad = float(dual.alpha @ gram @ dual.alpha)
    return float(r_squared - quad + 2.0 * (gram_row @ dual.alpha) - self_k)


def score_dual(dual: DualSolution, r_squared: float, gram, gram_row, self_k: float):
    """Sign of the dual margin, sgn(0) = +1."""
    return 1 if dual_margin(dual, r_squared, gram, gram_row, self_k) >= 0.0 else -1


def fit_sphere(embeddings, cfg: SmoothingConfig, mu: float = 0.05,
               epsilon: float = 1e-24, max_iters: int = 50000,
               init: SphereModel | None = None):
    """Head-only gradient descent on (c, r2) with step halving.

    r2 is clamped to >= 0 after every step.  Returns (model, trace).
    """
    h = _as_matrix(embeddings)
    if init is None:
        center = h.mean(axis=0)
        dist = np.einsum("ij,ij->i", h - center, h - center)
        model = SphereModel(center, float(np.median(dist)))
    else:
        model = SphereModel(init.center.copy(), init.r_squared)
    value = primal_objective(model, h, cfg)
    trace = [value]
    for _ in range(max_iters):
        grad_c, grad_r2, _ = primal_gradients(model, h, cfg)
        step = mu
        for _attempt in range(9):
            cand = SphereModel(model.center - step * grad_c,
                               max(0.0, model.r_squared - step * grad_r2))
            cand_value = primal_objective(cand, h, cfg)
            if np.isfinite(cand_value) and cand_value <= value:
                break
            step *= 0.5
        if not np.isfinite(cand_value):
            break
        model, prev, value = cand, value, cand_value
        trace.append(value)
        delta = value - prev
        if abs(delta) < 1e150 and delta * delta <= epsilon:
            break
    return model, trace

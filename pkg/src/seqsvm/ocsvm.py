"""Hyperplane one-class head: smooth primal, dual solver, and scoring.

The detector separates embeddings from the origin with a hyperplane
(w, rho).  Training minimizes

    F_tau(w, rho) = ||w||^2 / 2 + (1/(n*lam)) * sum_i S_tau(rho - w.h_i) - rho

where S_tau is an overflow-safe softplus that upper-bounds the hinge by
exactly log(2)/tau.  The equivalent box-simplex dual

    min (1/2) a^T K a   s.t.  sum a = 1,  0 <= a_i <= 1/(n*lam)

is solved by exact pairwise coordinate descent; the offset rho is read off
the margin (interior) multipliers afterwards.
"""

from dataclasses import dataclass

import numpy as np

from . import _smo
from .errors import NoMarginVectorError

# Multipliers this close to a box edge are not treated as margin vectors.
INTERIOR_MARGIN = 1e-8


@dataclass
class SmoothingConfig:
    tau: float = 10.0
    lam: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass
class HyperplaneModel:
    w: np.ndarray
    rho: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).ravel()
        self.rho = float(self.rho)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.rho)):
            raise ValueError("model parameters must be finite")


@dataclass
class DualSolution:
    """Feasible multipliers for either dual (shared constraint set)."""

    alpha: np.ndarray
    lam: float

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.lam = float(self.lam)
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        n = self.alpha.shape[0]
        if n == 0:
            raise ValueError("alpha must be non-empty")
        if abs(self.alpha.sum() - 1.0) > 1e-10:
            raise ValueError(f"multipliers must sum to 1, got {self.alpha.sum()!r}")
        upper = 1.0 / (n * self.lam)
        if np.any(self.alpha < -1e-12) or np.any(self.alpha > upper + 1e-12):
            raise ValueError(f"multipliers violate the box [0, {upper}]")

    @property
    def upper(self) -> float:
        return 1.0 / (self.alpha.shape[0] * self.lam)

    def interior_indices(self) -> np.ndarray:
        lo = INTERIOR_MARGIN
        hi = self.upper - INTERIOR_MARGIN
        return np.flatnonzero((self.alpha > lo) & (self.alpha < hi))


def hinge(omega):
    """max(0, omega), elementwise."""
    return np.maximum(0.0, omega)


def smooth_hinge(omega, tau: float):
    """(1/tau) * log(1 + exp(tau*omega)) without overflow.

    Evaluated as max(omega, 0) + (1/tau)*log1p(exp(-tau*|omega|)), which is
    the same function with the large exponent factored out.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    omega = np.asarray(omega, dtype=float)
    out = np.maximum(omega, 0.0) + np.log1p(np.exp(-tau * np.abs(omega))) / tau
    return out if out.ndim else float(out)


def sigmoid(x):
    """Logistic function, overflow-safe for any argument."""
    x = np.asarray(x, dtype=float)
    out = np.exp(np.minimum(x, 0.0)) / (1.0 + np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def _margins(model: HyperplaneModel, embeddings: np.ndarray) -> np.ndarray:
    return embeddings @ model.w - model.rho


def _as_matrix(embeddings) -> np.ndarray:
    h = np.asarray(embeddings, dtype=float)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValueError("embeddings must be a non-empty (n, m) matrix")
    return h


def primal_objective(model: HyperplaneModel, embeddings, cfg: SmoothingConfig) -> float:
    """Smoothed primal value F_tau."""
    h = _as_matrix(embeddings)
    n = h.shape[0]
    beta = model.rho - h @ model.w
    penalty = smooth_hinge(beta, cfg.tau).sum() / (n * cfg.lam)
    return float(0.5 * model.w @ model.w + penalty - model.rho)


def primal_objective_exact(model: HyperplaneModel, embeddings, lam: float) -> float:
    """Exact-hinge primal value F (the function F_tau approximates)."""
    h = _as_matrix(embeddings)
    n = h.shape[0]
    beta = model.rho - h @ model.w
    return float(0.5 * model.w @ model.w + hinge(beta).sum() / (n * lam) - model.rho)


def primal_gradients(model: HyperplaneModel, embeddings, cfg: SmoothingConfig):
    """Gradients of F_tau plus the per-item upstream vectors for the encoder.

    Returns (grad_w, grad_rho, upstreams) where upstreams[i] is the vector
    that, chained through the embedding gradient of item i, yields the
    encoder part of the total derivative.
    """
    h = _as_matrix(embeddings)
    n = h.shape[0]
    scale = 1.0 / (n * cfg.lam)
    sig = sigmoid(cfg.tau * (model.rho - h @ model.w))
    grad_w = model.w - scale * (sig @ h)
    grad_rho = scale * sig.sum() - 1.0
    upstreams = (-scale) * sig[:, None] * model.w[None, :]
    return grad_w, float(grad_rho), upstreams


def hyperplane_margin(model: HyperplaneModel, h_bar) -> np.ndarray | float:
    """Real-valued decision margin w.h - rho (positive = nominal side)."""
    h = np.asarray(h_bar, dtype=float)
    if h.ndim == 1:
        return float(h @ model.w - model.rho)
    return h @ model.w - model.rho


def score_hyperplane(model: HyperplaneModel, h_bar):
    """Sign of the margin; ties (margin exactly 0) count as nominal (+1)."""
    margin = hyperplane_margin(model, h_bar)
    if np.ndim(margin) == 0:
        return 1 if margin >= 0.0 else -1
    return np.where(margin >= 0.0, 1, -1)


def dual_objective(dual: DualSolution, gram) -> float:
    """(1/2) a^T K a."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    return float(0.5 * dual.alpha @ gram @ dual.alpha)


def smo_sweep(dual: DualSolution, gram) -> DualSolution:
    """One deterministic sweep of exact pair updates."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    alpha = _smo.sweep(dual.alpha, gram, dual.upper, sphere_form=False)
    return DualSolution(alpha, dual.lam)


def smo_solve(dual: DualSolution, gram, epsilon: float = 1e-12,
              max_sweeps: int = 10000):
    """Sweep to convergence; returns (DualSolution, converged, sweeps)."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])

    def value(a):
        return 0.5 * a @ gram @ a

    alpha, converged, used = _smo.solve(dual.alpha, gram, dual.upper,
                                        False, value, epsilon, max_sweeps)
    return DualSolution(alpha, dual.lam), converged, used


def recover_rho(dual: DualSolution, gram) -> float:
    """Offset from the margin multipliers: mean of (K a)_i over interior i."""
    gram = _smo.check_gram(gram, dual.alpha.shape[0])
    interior = dual.interior_indices()
    if interior.size == 0:
        raise NoMarginVectorError(
            "no multiplier is strictly inside the box; cannot recover the offset")
    return float((gram @ dual.alpha)[interior].mean())


def dual_margin(dual: DualSolution, rho: float, gram_row) -> float:
    """Decision margin of a test item from its gram row against the support set."""
    gram_row = np.asarray(gram_row, dtype=float)
    return float(gram_row @ dual.alpha - rho)


def score_dual(dual: DualSolution, rho: float, gram_row):
    """Sign of the dual margin, sgn(0) = +1."""
    return 1 if dual_margin(dual, rho, gram_row) >= 0.0 else -1


def fit_hyperplane(embeddings, cfg: SmoothingConfig, mu: float = 0.05,
                   epsilon: float = 1e-24, max_iters: int = 50000,
                   init: HyperplaneModel | None = None):
    """Head-only gradient descent to the unique minimizer of F_tau.

    Uses step halving (8 retries) on any objective increase.  Returns
    (model, trace).  The objective is strictly convex, so any start
    reaches the same value; callers pick ``init`` freely.
    """
    h = _as_matrix(embeddings)
    if init is None:
        model = HyperplaneModel(h.mean(axis=0), 0.0)
    else:
        model = HyperplaneModel(init.w.copy(), init.rho)
    value = primal_objective(model, h, cfg)
    trace = [value]
    for _ in range(max_iters):
        grad_w, grad_rho, _ = primal_gradients(model, h, cfg)
        step = mu
        for _attempt in range(9):
            cand = HyperplaneModel(model.w - step * grad_w, model.rho - step * grad_rho)
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

"""Joint training of the sequence encoder and the one-class heads.

Four loops share one skeleton: embed every sequence under the current
encoder, take a head step and one Cayley pass per encoder block, and stop
when the squared change of the tracked objective falls to epsilon.

gradient   descends the smooth primal F_tau over head and encoder jointly.
qp         alternates an exact SMO dual solve with one Cayley pass that
           descends the dual quadratic (kappa for the hyperplane, pi for
           the sphere) at the fresh multipliers.
semi/full  descend the smooth surrogates of the labeled extensions.

Encoder blocks are updated sequentially within an iteration but always with
gradients taken at the iteration-start parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ocsvm, rnn, stiefel, svdd
from .data import SequenceBatch
from .errors import ConfigError, DataError, DivergenceError, StepFailureError
from .ocsvm import DualSolution, HyperplaneModel, SmoothingConfig, sigmoid, smooth_hinge
from .seeding import INIT_STREAM, derive_seed
from .svdd import SphereModel

HEADS = ("hyperplane", "sphere")
METHODS = ("gradient", "qp")
SUPERVISION_MODES = ("unsupervised", "semi", "full")

MAX_HALVINGS = 8


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data."""

    head: str = "hyperplane"
    method: str = "gradient"
    supervision: str = "unsupervised"
    cell: str = rnn.LSTM
    m: int = 8
    pooling: str = "mean"
    mu: float = 0.05
    lam: float = 0.5
    tau: float = 10.0
    epsilon: float = 1e-10
    max_outer_iters: int = 200
    seed: int = 0
    cost: float = 1.0
    cost_margin: float = 1.0
    cost_unlabeled: float = 1.0
    cost_labeled: float = 1.0
    smo_epsilon: float = 1e-12
    smo_max_sweeps: int = 10000
    freeze_encoder: bool = False

    def __post_init__(self):
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.supervision not in SUPERVISION_MODES:
            raise ConfigError(
                f"supervision must be one of {SUPERVISION_MODES}, got {self.supervision!r}")
        if self.cell not in (rnn.LSTM, rnn.GRU):
            raise ConfigError(f"cell must be lstm or gru, got {self.cell!r}")
        if self.pooling not in rnn.POOLING_MODES:
            raise ConfigError(f"pooling must be one of {rnn.POOLING_MODES}")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.mu < 0.0:
            raise ConfigError("mu must be non-negative")
        for name in ("lam", "tau", "epsilon", "smo_epsilon",
                     "cost", "cost_margin", "cost_unlabeled", "cost_labeled"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.smo_max_sweeps < 1:
            raise ConfigError("iteration caps must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.method == "qp":
            if self.supervision != "unsupervised":
                raise ConfigError("the qp method supports only unsupervised training")
            if self.lam > 1.0:
                raise ConfigError(
                    "lam must be at most 1 for the qp method; the dual box "
                    "cannot reach a unit sum otherwise")


@dataclass
class DualHyperplaneHead:
    """Hyperplane detector in dual form; scores through support inner products."""

    alpha: np.ndarray
    lam: float
    rho: float
    support: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.support = np.asarray(self.support, dtype=float)
        if self.support.ndim != 2 or self.support.shape[0] != self.alpha.shape[0]:
            raise ValueError("support must be (n, m) aligned with alpha")

    def margins(self, embeddings: np.ndarray) -> np.ndarray:
        return (embeddings @ self.support.T) @ self.alpha - self.rho


@dataclass
class DualSphereHead:
    """Sphere detector in dual form; the center never materializes."""

    alpha: np.ndarray
    lam: float
    r_squared: float
    support: np.ndarray
    quad: float = field(init=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.support = np.asarray(self.support, dtype=float)
        if self.support.ndim != 2 or self.support.shape[0] != self.alpha.shape[0]:
            raise ValueError("support must be (n, m) aligned with alpha")
        weighted = self.support.T @ self.alpha
        self.quad = float(weighted @ weighted)

    def margins(self, embeddings: np.ndarray) -> np.ndarray:
        cross = (embeddings @ self.support.T) @ self.alpha
        self_k = np.einsum("ij,ij->i", embeddings, embeddings)
        return self.r_squared - self.quad + 2.0 * cross - self_k


@dataclass
class TrainedDetector:
    params: rnn.RnnParams
    head: object
    config: TrainConfig
    trace: list
    converged: bool
    warnings: list = field(default_factory=list)

    def embed(self, batch: SequenceBatch) -> np.ndarray:
        return rnn.embed_batch(batch.values(), self.params, self.config.pooling)

    def margins(self, batch: SequenceBatch) -> np.ndarray:
        emb = self.embed(batch)
        if isinstance(self.head, HyperplaneModel):
            return ocsvm.hyperplane_margin(self.head, emb)
        if isinstance(self.head, SphereModel):
            return svdd.sphere_margin(self.head, emb)
        return self.head.margins(emb)

    def predict(self, batch: SequenceBatch) -> np.ndarray:
        return np.where(self.margins(batch) >= 0.0, 1, -1)


def smooth_min(a, b, tau: float):
    """Soft minimum -(1/tau) log(exp(-tau a) + exp(-tau b)).

    Always at most min(a, b), and approaches it as tau grows.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.minimum(a, b) - np.log1p(np.exp(-tau * np.abs(a - b))) / tau
    return float(out) if out.ndim == 0 else out


def _init_encoder(batch: SequenceBatch, cfg: TrainConfig) -> rnn.RnnParams:
    if batch.n == 0:
        raise DataError("cannot train on an empty batch")
    return rnn.init_params(cfg.cell, cfg.m, batch.p, derive_seed(cfg.seed, INIT_STREAM))


def _encoder_step(params: rnn.RnnParams, grads: rnn.RnnGradients,
                  step: float) -> rnn.RnnParams:
    out = params.copy()
    for g in range(out.w_in.shape[0]):
        out.w_in[g] = stiefel.cayley_update(params.w_in[g], grads.w_in[g], step)
        out.w_rec[g] = stiefel.cayley_update(params.w_rec[g], grads.w_rec[g], step)
        if out.bias is not None:
            out.bias[g] = stiefel.cayley_update(params.bias[g], grads.bias[g], step)
    return out


def _gradient_loop(batch: SequenceBatch, cfg: TrainConfig, params: rnn.RnnParams,
                   head, objective, gradients, head_step):
    """Shared descent skeleton.

    objective(head, emb) -> float; gradients(head, emb) -> (head_grads,
    upstreams); head_step(head, head_grads, step) -> new head.  Halves the
    step on any increase or failure, accepting a finite increase only after
    the retries run out.
    """
    values = batch.values()
    emb = rnn.embed_batch(values, params, cfg.pooling)
    value = objective(head, emb)
    trace = [value]
    converged = False
    update_encoder = not cfg.freeze_encoder and cfg.mu > 0.0
    for k in range(cfg.max_outer_iters):
        head_grads, upstreams = gradients(head, emb)
        enc_grads = (rnn.accumulate_gradients(values, params, cfg.pooling, upstreams)
                     if update_encoder else None)
        step = cfg.mu
        accepted = None
        for attempt in range(MAX_HALVINGS + 1):
            try:
                cand_head = head_step(head, head_grads, step)
                cand_params = (_encoder_step(params, enc_grads, step)
                               if update_encoder else params)
                cand_emb = rnn.embed_batch(values, cand_params, cfg.pooling)
                cand_value = objective(cand_head, cand_emb)
            except (StepFailureError, ValueError):
                step *= 0.5
                continue
            if np.isfinite(cand_value) and (cand_value <= value or attempt == MAX_HALVINGS):
                accepted = (cand_head, cand_params, cand_emb, cand_value)
                break
            step *= 0.5
        if accepted is None:
            raise DivergenceError(
                f"objective became non-finite at outer iteration {k + 1}",
                iteration=k + 1)
        head, params, emb, cand_value = accepted
        prev, value = value, cand_value
        trace.append(value)
        delta = value - prev
        if abs(delta) < 1e150 and delta * delta <= cfg.epsilon:
            converged = True
            break
    return head, params, trace, converged


def train_gradient(batch: SequenceBatch, cfg: TrainConfig) -> TrainedDetector:
    """Joint descent of the smooth one-class primal; labels are ignored."""
    if cfg.method != "gradient":
        raise ConfigError("train_gradient requires method='gradient'")
    params = _init_encoder(batch, cfg)
    scfg = SmoothingConfig(cfg.tau, cfg.lam)
    emb0 = rnn.embed_batch(batch.values(), params, cfg.pooling)
    if cfg.head == "hyperplane":
        head = HyperplaneModel(emb0.mean(axis=0), 0.0)
        objective = lambda h, e: ocsvm.primal_objective(h, e, scfg)

        def gradients(h, e):
            grad_w, grad_rho, upstreams = ocsvm.primal_gradients(h, e, scfg)
            return (grad_w, grad_rho), upstreams

        def head_step(h, grads, step):
            return HyperplaneModel(h.w - step * grads[0], h.rho - step * grads[1])
    else:
        center = emb0.mean(axis=0)
        dist = np.einsum("ij,ij->i", emb0 - center, emb0 - center)
        head = SphereModel(center, float(np.median(dist)))
        objective = lambda h, e: svdd.primal_objective(h, e, scfg)

        def gradients(h, e):
            grad_c, grad_r2, upstreams = svdd.primal_gradients(h, e, scfg)
            return (grad_c, grad_r2), upstreams

        def head_step(h, grads, step):
            return SphereModel(h.center - step * grads[0],
                               max(0.0, h.r_squared - step * grads[1]))
    head, params, trace, converged = _gradient_loop(
        batch, cfg, params, head, objective, gradients, head_step)
    return TrainedDetector(params, head, cfg, trace, converged)


def train_qp(batch: SequenceBatch, cfg: TrainConfig) -> TrainedDetector:
    """Alternate an exact dual solve with one Cayley pass on the encoder."""
    if cfg.method != "qp":
        raise ConfigError("train_qp requires method='qp'")
    params = _init_encoder(batch, cfg)
    mod = ocsvm if cfg.head == "hyperplane" else svdd
    values = batch.values()
    n = batch.n
    dual = DualSolution(np.full(n, 1.0 / n), cfg.lam)
    emb = rnn.embed_batch(values, params, cfg.pooling)
    gram = emb @ emb.T
    value = mod.dual_objective(dual, gram)
    trace = [value]
    warnings = []
    converged = False
    update_encoder = not cfg.freeze_encoder and cfg.mu > 0.0
    for k in range(cfg.max_outer_iters):
        dual, smo_ok, _ = mod.smo_solve(dual, gram, cfg.smo_epsilon, cfg.smo_max_sweeps)
        if not smo_ok:
            warnings.append(
                f"smo hit the sweep cap at outer iteration {k + 1}")
        if update_encoder:
            # The dual minimum is the negated primal optimum, so lowering
            # the primal over the encoder means raising the fixed-alpha
            # dual value; the line search accepts ascent steps.
            fixed = mod.dual_objective(dual, gram)
            weighted = emb.T @ dual.alpha
            if cfg.head == "hyperplane":
                upstreams = -dual.alpha[:, None] * weighted[None, :]
            else:
                upstreams = 2.0 * dual.alpha[:, None] * (emb - weighted[None, :])
            enc_grads = rnn.accumulate_gradients(values, params, cfg.pooling, upstreams)
            step = cfg.mu
            accepted = None
            for attempt in range(MAX_HALVINGS + 1):
                try:
                    cand_params = _encoder_step(params, enc_grads, step)
                    cand_emb = rnn.embed_batch(values, cand_params, cfg.pooling)
                    cand_gram = cand_emb @ cand_emb.T
                    cand_value = mod.dual_objective(dual, cand_gram)
                except (StepFailureError, ValueError):
                    step *= 0.5
                    continue
                if np.isfinite(cand_value) and (cand_value >= fixed or attempt == MAX_HALVINGS):
                    accepted = (cand_params, cand_emb, cand_gram)
                    break
                step *= 0.5
            if accepted is None:
                raise DivergenceError(
                    f"dual objective became non-finite at outer iteration {k + 1}",
                    iteration=k + 1)
            params, emb, gram = accepted
        prev, value = value, mod.dual_objective(dual, gram)
        trace.append(value)
        delta = value - prev
        if abs(delta) < 1e150 and delta * delta <= cfg.epsilon:
            converged = True
            break
    if cfg.head == "hyperplane":
        head = DualHyperplaneHead(dual.alpha, cfg.lam, ocsvm.recover_rho(dual, gram), emb)
    else:
        head = DualSphereHead(dual.alpha, cfg.lam, svdd.recover_r_squared(dual, gram), emb)
    return TrainedDetector(params, head, cfg, trace, converged, warnings)


def _split_labels(batch: SequenceBatch, cfg: TrainConfig):
    labeled = np.array([it.label is not None for it in batch.items], dtype=bool)
    if cfg.supervision == "semi":
        if not labeled.any() or labeled.all():
            raise ConfigError(
                "semi supervision needs at least one labeled and one unlabeled item")
    else:
        if not labeled.all():
            raise ConfigError("full supervision requires a label on every item")
    y = np.array([it.label if it.label is not None else 0 for it in batch.items],
                 dtype=float)
    return labeled, y


def train_semisupervised_gradient(batch: SequenceBatch, cfg: TrainConfig) -> TrainedDetector:
    """Smooth surrogates of the labeled extensions, same loop as train_gradient.

    The hyperplane variant trains the classifier margin y(w.h + rho) on
    labeled items and lets each unlabeled item pick its cheaper side through
    a soft minimum; the returned detector carries -rho so that scoring stays
    sgn(w.h - rho).  The sphere variant learns a shared label margin gamma,
    kept non-negative by a softplus reparameterization.
    """
    if cfg.method != "gradient":
        raise ConfigError("semi and full supervision train with method='gradient'")
    params = _init_encoder(batch, cfg)
    labeled, y = _split_labels(batch, cfg)
    unlabeled = ~labeled
    tau, n = cfg.tau, batch.n
    emb0 = rnn.embed_batch(batch.values(), params, cfg.pooling)

    if cfg.head == "hyperplane":
        cost = cfg.cost
        head = (emb0.mean(axis=0), 0.0)

        def objective(state, emb):
            w, rho = state
            total = float(np.linalg.norm(w))
            scores = emb @ w
            lab = smooth_hinge(1.0 - y[labeled] * (scores[labeled] + rho), tau)
            total += cost * float(lab.sum())
            if unlabeled.any():
                u = scores[unlabeled] - rho
                inside = smooth_hinge(1.0 - u, tau)
                outside = smooth_hinge(1.0 + u, tau)
                total += cost * float(np.sum(smooth_min(outside, inside, tau)))
            return total

        def gradients(state, emb):
            w, rho = state
            scores = emb @ w
            grad_w = w / max(float(np.linalg.norm(w)), 1e-12)
            grad_rho = 0.0
            upstreams = np.zeros_like(emb)
            sig_lab = sigmoid(tau * (1.0 - y[labeled] * (scores[labeled] + rho)))
            coeff_lab = -cost * sig_lab * y[labeled]
            grad_w = grad_w + coeff_lab @ emb[labeled]
            grad_rho += float(coeff_lab.sum())
            upstreams[labeled] = coeff_lab[:, None] * w[None, :]
            if unlabeled.any():
                u = scores[unlabeled] - rho
                inside = smooth_hinge(1.0 - u, tau)
                outside = smooth_hinge(1.0 + u, tau)
                w_out = sigmoid(tau * (inside - outside))
                coeff_unl = cost * (w_out * sigmoid(tau * (1.0 + u))
                                    - (1.0 - w_out) * sigmoid(tau * (1.0 - u)))
                grad_w = grad_w + coeff_unl @ emb[unlabeled]
                grad_rho += -float(coeff_unl.sum())
                upstreams[unlabeled] = coeff_unl[:, None] * w[None, :]
            return (grad_w, grad_rho), upstreams

        def head_step(state, grads, step):
            w, rho = state
            return (w - step * grads[0], rho - step * grads[1])

        head, params, trace, converged = _gradient_loop(
            batch, cfg, params, head, objective, gradients, head_step)
        w, rho = head
        model = HyperplaneModel(w, -rho)
    else:
        c1, c2, c3 = cfg.cost_margin, cfg.cost_unlabeled, cfg.cost_labeled
        center = emb0.mean(axis=0)
        dist = np.einsum("ij,ij->i", emb0 - center, emb0 - center)
        head = (center, float(np.median(dist)), 0.0)

        def objective(state, emb):
            center, r2, g = state
            gamma = float(np.logaddexp(0.0, g))
            diff = emb - center[None, :]
            psi = np.einsum("ij,ij->i", diff, diff) - r2
            total = r2 - c1 * gamma
            if unlabeled.any():
                total += c2 * float(smooth_hinge(psi[unlabeled], tau).sum())
            total += c3 * float(smooth_hinge(y[labeled] * psi[labeled] + gamma, tau).sum())
            return total

        def gradients(state, emb):
            center, r2, g = state
            gamma = float(np.logaddexp(0.0, g))
            diff = emb - center[None, :]
            psi = np.einsum("ij,ij->i", diff, diff) - r2
            upstreams = np.zeros_like(emb)
            sig_lab = sigmoid(tau * (y[labeled] * psi[labeled] + gamma))
            coeff_lab = c3 * sig_lab * y[labeled]
            grad_center = -2.0 * (coeff_lab @ diff[labeled])
            grad_r2 = 1.0 - float(coeff_lab.sum())
            grad_gamma = -c1 + c3 * float(sig_lab.sum())
            upstreams[labeled] = 2.0 * coeff_lab[:, None] * diff[labeled]
            if unlabeled.any():
                coeff_unl = c2 * sigmoid(tau * psi[unlabeled])
                grad_center = grad_center - 2.0 * (coeff_unl @ diff[unlabeled])
                grad_r2 -= float(coeff_unl.sum())
                upstreams[unlabeled] = 2.0 * coeff_unl[:, None] * diff[unlabeled]
            grad_g = grad_gamma * sigmoid(g)
            return (grad_center, grad_r2, grad_g), upstreams

        def head_step(state, grads, step):
            center, r2, g = state
            return (center - step * grads[0],
                    max(0.0, r2 - step * grads[1]),
                    g - step * grads[2])

        head, params, trace, converged = _gradient_loop(
            batch, cfg, params, head, objective, gradients, head_step)
        center, r2, _ = head
        model = SphereModel(center, r2)
    return TrainedDetector(params, model, cfg, trace, converged)


def train(batch: SequenceBatch, cfg: TrainConfig) -> TrainedDetector:
    """Dispatch on method and supervision."""
    if cfg.method == "qp":
        return train_qp(batch, cfg)
    if cfg.supervision == "unsupervised":
        return train_gradient(batch, cfg)
    return train_semisupervised_gradient(batch, cfg)

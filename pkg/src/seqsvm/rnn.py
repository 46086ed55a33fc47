"""Recurrent encoders that map variable-length sequences to fixed vectors.

Two cells are supported: an LSTM without peephole connections (four blocks,
each with input weights W, recurrent weights R, and a bias b) and a
bias-free GRU (three blocks).  A sequence X with columns x_1..x_d is run
from zero initial state and the hidden states are pooled (mean, last, or
elementwise max) into one embedding.

Gradients of <upstream, pooled hidden state> with respect to every
parameter block are computed by reverse-mode accumulation over the full
unroll; nothing is truncated, which keeps the gradients exact enough to be
validated against finite differences.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, seeding
from .stiefel import init_orthogonal

LSTM = "lstm"
GRU = "gru"

LSTM_BLOCKS = ("candidate", "input_gate", "forget_gate", "output_gate")
GRU_BLOCKS = ("update_gate", "reset_gate", "candidate")

POOLING_MODES = ("mean", "last", "max")


@dataclass
class RnnParams:
    """Stacked cell parameters.

    ``w_in`` is (n_blocks, m, p), ``w_rec`` is (n_blocks, m, m), and
    ``bias`` is (n_blocks, m) for the LSTM or ``None`` for the GRU.
    Trained parameters keep every block orthonormal (unit-norm for biases);
    the constructor does not enforce that so perturbed copies can be built
    freely, e.g. for finite-difference checks.
    """

    cell: str
    w_in: np.ndarray
    w_rec: np.ndarray
    bias: np.ndarray | None

    def __post_init__(self):
        if self.cell not in (LSTM, GRU):
            raise ValueError(f"unknown cell kind: {self.cell!r}")
        self.w_in = np.ascontiguousarray(self.w_in, dtype=float)
        self.w_rec = np.ascontiguousarray(self.w_rec, dtype=float)
        blocks = 4 if self.cell == LSTM else 3
        if self.w_in.ndim != 3 or self.w_in.shape[0] != blocks:
            raise ValueError(f"w_in must be ({blocks}, m, p), got {self.w_in.shape}")
        m = self.w_in.shape[1]
        if self.w_rec.shape != (blocks, m, m):
            raise ValueError(f"w_rec must be ({blocks}, {m}, {m}), got {self.w_rec.shape}")
        if self.cell == LSTM:
            self.bias = np.ascontiguousarray(self.bias, dtype=float)
            if self.bias.shape != (blocks, m):
                raise ValueError(f"bias must be ({blocks}, {m}), got shape {np.shape(self.bias)}")
        elif self.bias is not None:
            raise ValueError("GRU carries no bias vectors")

    @property
    def m(self) -> int:
        return self.w_in.shape[1]

    @property
    def p(self) -> int:
        return self.w_in.shape[2]

    @property
    def block_names(self) -> tuple:
        return LSTM_BLOCKS if self.cell == LSTM else GRU_BLOCKS

    def copy(self) -> "RnnParams":
        bias = None if self.bias is None else self.bias.copy()
        return RnnParams(self.cell, self.w_in.copy(), self.w_rec.copy(), bias)

    def n_params(self) -> int:
        total = self.w_in.size + self.w_rec.size
        if self.bias is not None:
            total += self.bias.size
        return total


@dataclass
class RnnGradients:
    """Per-block gradients mirroring the RnnParams layout."""

    w_in: np.ndarray
    w_rec: np.ndarray
    bias: np.ndarray | None

    def add_(self, other: "RnnGradients") -> "RnnGradients":
        self.w_in += other.w_in
        self.w_rec += other.w_rec
        if self.bias is not None:
            self.bias += other.bias
        return self

    @staticmethod
    def zeros_like(params: RnnParams) -> "RnnGradients":
        bias = None if params.bias is None else np.zeros_like(params.bias)
        return RnnGradients(np.zeros_like(params.w_in), np.zeros_like(params.w_rec), bias)


@dataclass
class Embedding:
    h_bar: np.ndarray
    c_bar: np.ndarray | None = None


def init_params(cell: str, m: int, p: int, seed: int) -> RnnParams:
    """Seeded orthonormal initialization of every block.

    Blocks wider than tall are initialized through their transpose so the
    orthonormality constraint sits on the short dimension.
    """
    if cell not in (LSTM, GRU):
        raise ValueError(f"unknown cell kind: {cell!r}")
    if m < 1 or p < 1:
        raise ValueError("m and p must be positive")
    blocks = 4 if cell == LSTM else 3
    w_in = np.empty((blocks, m, p))
    w_rec = np.empty((blocks, m, m))
    bias = np.empty((blocks, m)) if cell == LSTM else None
    for g in range(blocks):
        sub_in = seeding.derive_seed(seed, f"{cell}-in-{g}")
        if m >= p:
            w_in[g] = init_orthogonal(m, p, sub_in).value
        else:
            w_in[g] = init_orthogonal(p, m, sub_in).value.T
        w_rec[g] = init_orthogonal(m, m, seeding.derive_seed(seed, f"{cell}-rec-{g}")).value
        if bias is not None:
            bias[g] = init_orthogonal(m, 1, seeding.derive_seed(seed, f"{cell}-bias-{g}")).value.ravel()
    return RnnParams(cell, w_in, w_rec, bias)


def _check_x(x_seq: np.ndarray, params: RnnParams) -> np.ndarray:
    """Validate a (p, d) sequence and return its (d, p) time-major copy."""
    x_seq = np.asarray(x_seq, dtype=float)
    if x_seq.ndim != 2:
        raise ValueError(f"sequence must be a p x d matrix, got ndim={x_seq.ndim}")
    if x_seq.shape[0] != params.p:
        raise ValueError(f"sequence has {x_seq.shape[0]} dims, params expect {params.p}")
    if x_seq.shape[1] == 0:
        raise ValueError("empty sequence (d = 0)")
    return np.ascontiguousarray(x_seq.T)


def lstm_step(x, h_prev, c_prev, params: RnnParams):
    """One LSTM step; returns (h, c)."""
    if params.cell != LSTM:
        raise ValueError("lstm_step requires LSTM params")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != params.p:
        raise ValueError(f"x has {x.shape[1]} dims, params expect {params.p}")
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if h_prev.shape != (params.m,) or c_prev.shape != (params.m,):
        raise ValueError("state vectors must have length m")
    pre = params.w_in @ x.ravel() + params.w_rec @ h_prev + params.bias
    z = np.tanh(pre[0])
    gates = np.exp(np.minimum(pre[1:], 0.0)) / (1.0 + np.exp(-np.abs(pre[1:])))
    c = gates[0] * z + gates[1] * c_prev
    h = gates[2] * np.tanh(c)
    return h, c


def gru_step(x, h_prev, params: RnnParams):
    """One GRU step; returns h."""
    if params.cell != GRU:
        raise ValueError("gru_step requires GRU params")
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != params.p:
        raise ValueError(f"x has {x.shape[0]} dims, params expect {params.p}")
    h_prev = np.asarray(h_prev, dtype=float)
    if h_prev.shape != (params.m,):
        raise ValueError("state vector must have length m")
    az = params.w_in[0] @ x + params.w_rec[0] @ h_prev
    ar = params.w_in[1] @ x + params.w_rec[1] @ h_prev
    z = np.exp(np.minimum(az, 0.0)) / (1.0 + np.exp(-np.abs(az)))
    r = np.exp(np.minimum(ar, 0.0)) / (1.0 + np.exp(-np.abs(ar)))
    n = np.tanh(params.w_in[2] @ x + r * (params.w_rec[2] @ h_prev))
    return n * z + h_prev * (1.0 - z)


def pool_forward(states: np.ndarray, pooling: str) -> np.ndarray:
    """Pool a (d, m) state history into one m-vector."""
    if pooling == "mean":
        return states.sum(axis=0) / states.shape[0]
    if pooling == "last":
        return states[-1].copy()
    if pooling == "max":
        return states.max(axis=0)
    raise ValueError(f"unknown pooling mode: {pooling!r}")


def pool_upstream(states: np.ndarray, pooling: str, upstream: np.ndarray) -> np.ndarray:
    """Distribute an upstream gradient back onto the per-step states.

    Max pooling routes each coordinate to its earliest maximizing step.
    """
    d, m = states.shape
    d_h = np.zeros((d, m))
    if pooling == "mean":
        d_h[:] = upstream / d
    elif pooling == "last":
        d_h[-1] = upstream
    elif pooling == "max":
        rows = np.argmax(states, axis=0)
        d_h[rows, np.arange(m)] = upstream
    else:
        raise ValueError(f"unknown pooling mode: {pooling!r}")
    return d_h


def _forward(x_t: np.ndarray, params: RnnParams):
    if params.cell == LSTM:
        return kernels.lstm_forward(x_t, params.w_in, params.w_rec, params.bias)
    return kernels.gru_forward(x_t, params.w_in, params.w_rec)


def embed_sequence(x_seq, params: RnnParams, pooling: str = "mean") -> Embedding:
    """Run the cell over a (p, d) sequence and pool the hidden states."""
    x_t = _check_x(x_seq, params)
    state = _forward(x_t, params)
    h_bar = pool_forward(state[0], pooling)
    c_bar = pool_forward(state[1], pooling) if params.cell == LSTM else None
    return Embedding(h_bar=h_bar, c_bar=c_bar)


def embed_gradients(x_seq, params: RnnParams, pooling: str, upstream) -> RnnGradients:
    """Gradient of <upstream, h_bar> with respect to every parameter block."""
    x_t = _check_x(x_seq, params)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (params.m,):
        raise ValueError(f"upstream must have length m={params.m}")
    state = _forward(x_t, params)
    d_h = pool_upstream(state[0], pooling, upstream)
    if params.cell == LSTM:
        g_in, g_rec, g_bias = kernels.lstm_backward(x_t, params.w_rec, *state, d_h)
        return RnnGradients(g_in, g_rec, g_bias)
    g_in, g_rec = kernels.gru_backward(x_t, params.w_rec, *state, d_h)
    return RnnGradients(g_in, g_rec, None)


def embed_batch(values: list, params: RnnParams, pooling: str = "mean") -> np.ndarray:
    """Embed each (p, d_i) sequence; returns an (n, m) matrix of h_bar rows."""
    out = np.empty((len(values), params.m))
    for i, x_seq in enumerate(values):
        out[i] = embed_sequence(x_seq, params, pooling).h_bar
    return out


def accumulate_gradients(values: list, params: RnnParams, pooling: str,
                         upstreams: np.ndarray) -> RnnGradients:
    """Sum of per-sequence embedding gradients, one upstream row per item."""
    upstreams = np.asarray(upstreams, dtype=float)
    if upstreams.shape != (len(values), params.m):
        raise ValueError("upstreams must be (n, m)")
    total = RnnGradients.zeros_like(params)
    for x_seq, up in zip(values, upstreams):
        total.add_(embed_gradients(x_seq, params, pooling, up))
    return total

"""Shared test oracles.

Everything here is written independently of the library internals: scalar
recurrence references use plain loops and local math, finite differences
probe objectives numerically, and the dual grid scans enumerate the feasible
polytope directly.  Tests compare library outputs against these.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-python fallback is much slower
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def sig(x):
    """Stable scalar logistic."""
    x = float(x)
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def ref_lstm_states(x_seq, blocks):
    """Loop-based LSTM reference.

    ``blocks`` maps block name to (w_in, w_rec, bias).  Returns the (d, m)
    array of hidden states for a (p, d) input sequence.
    """
    w_z, r_z, b_z = blocks["candidate"]
    w_s, r_s, b_s = blocks["input_gate"]
    w_f, r_f, b_f = blocks["forget_gate"]
    w_o, r_o, b_o = blocks["output_gate"]
    m = w_z.shape[0]
    x_seq = np.asarray(x_seq, dtype=float)
    h = np.zeros(m)
    c = np.zeros(m)
    states = []
    for t in range(x_seq.shape[1]):
        x = x_seq[:, t]
        z = np.tanh(w_z @ x + r_z @ h + b_z)
        s = np.array([sig(v) for v in (w_s @ x + r_s @ h + b_s)])
        f = np.array([sig(v) for v in (w_f @ x + r_f @ h + b_f)])
        o = np.array([sig(v) for v in (w_o @ x + r_o @ h + b_o)])
        c = s * z + f * c
        h = o * np.tanh(c)
        states.append(h.copy())
    return np.asarray(states)


def ref_gru_states(x_seq, blocks):
    """Loop-based GRU reference (no biases); same contract as the LSTM one."""
    w_u, r_u = blocks["update_gate"]
    w_r, r_r = blocks["reset_gate"]
    w_c, r_c = blocks["candidate"]
    m = w_u.shape[0]
    x_seq = np.asarray(x_seq, dtype=float)
    h = np.zeros(m)
    states = []
    for t in range(x_seq.shape[1]):
        x = x_seq[:, t]
        u = np.array([sig(v) for v in (w_u @ x + r_u @ h)])
        r = np.array([sig(v) for v in (w_r @ x + r_r @ h)])
        cand = np.tanh(w_c @ x + r * (r_c @ h))
        h = cand * u + h * (1.0 - u)
        states.append(h.copy())
    return np.asarray(states)


def ref_pool(states, pooling):
    if pooling == "mean":
        return states.mean(axis=0)
    if pooling == "last":
        return states[-1].copy()
    return states.max(axis=0)


def fd_grad(fn, x, step=1e-5):
    """Central finite differences of a scalar function over an array."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    out = grad.ravel()
    for k in range(flat.size):
        keep = flat[k]
        flat[k] = keep + step
        hi = fn(x)
        flat[k] = keep - step
        lo = fn(x)
        flat[k] = keep
        out[k] = (hi - lo) / (2.0 * step)
    return grad


def rel_err(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(1e-8, float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
    return float(np.max(np.abs(analytic - numeric))) / scale


def pairs_auc(scores, labels):
    """Concordant-pair probability with half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


@njit(cache=True)
def _scan_free1(gram, upper, res, sphere):
    best = np.inf
    steps = int(upper / res) + 1
    for i0 in range(steps + 1):
        a0 = i0 * res
        if a0 > upper:
            a0 = upper
        a1 = 1.0 - a0
        # The remainder coordinate can drift off the box by float error even
        # when the exact corner is feasible (e.g. upper = 1/3); clamp it.
        if a1 < -1e-9 or a1 > upper + 1e-9:
            continue
        if a1 < 0.0:
            a1 = 0.0
        elif a1 > upper:
            a1 = upper
        q = gram[0, 0] * a0 * a0 + 2.0 * gram[0, 1] * a0 * a1 + gram[1, 1] * a1 * a1
        if sphere:
            v = q - (a0 * gram[0, 0] + a1 * gram[1, 1])
        else:
            v = 0.5 * q
        if v < best:
            best = v
    return best


@njit(cache=True)
def _scan_free2(gram, upper, res, sphere):
    best = np.inf
    steps = int(upper / res) + 1
    for i0 in range(steps + 1):
        a0 = i0 * res
        if a0 > upper:
            a0 = upper
        if a0 > 1.0:
            break
        for i1 in range(steps + 1):
            a1 = i1 * res
            if a1 > upper:
                a1 = upper
            a2 = 1.0 - a0 - a1
            if a2 < -1e-9 or a2 > upper + 1e-9:
                continue
            if a2 < 0.0:
                a2 = 0.0
            elif a2 > upper:
                a2 = upper
            q = (gram[0, 0] * a0 * a0 + gram[1, 1] * a1 * a1 + gram[2, 2] * a2 * a2
                 + 2.0 * (gram[0, 1] * a0 * a1 + gram[0, 2] * a0 * a2
                          + gram[1, 2] * a1 * a2))
            if sphere:
                v = q - (a0 * gram[0, 0] + a1 * gram[1, 1] + a2 * gram[2, 2])
            else:
                v = 0.5 * q
            if v < best:
                best = v
    return best


@njit(cache=True)
def _scan_free3(gram, upper, res, sphere):
    best = np.inf
    steps = int(upper / res) + 1
    for i0 in range(steps + 1):
        a0 = i0 * res
        if a0 > upper:
            a0 = upper
        if a0 > 1.0:
            break
        for i1 in range(steps + 1):
            a1 = i1 * res
            if a1 > upper:
                a1 = upper
            rest = 1.0 - a0 - a1
            if rest < 0.0:
                break
            # a2 + a3 = rest with both inside the box
            lo = rest - upper
            if lo < 0.0:
                lo = 0.0
            hi = upper if upper < rest else rest
            if hi < lo:
                continue
            # quadratic in a2 along alpha = (a0, a1, a2, rest - a2)
            cross02 = gram[0, 2] * a0 + gram[1, 2] * a1
            cross03 = gram[0, 3] * a0 + gram[1, 3] * a1
            base = (gram[0, 0] * a0 * a0 + 2.0 * gram[0, 1] * a0 * a1
                    + gram[1, 1] * a1 * a1 + 2.0 * cross03 * rest
                    + gram[3, 3] * rest * rest)
            lin = 2.0 * (cross02 - cross03 + (gram[2, 3] - gram[3, 3]) * rest)
            quad = gram[2, 2] - 2.0 * gram[2, 3] + gram[3, 3]
            i_lo = int(math.ceil(lo / res - 1e-9))
            i_hi = int(math.floor(hi / res + 1e-9))
            for i2 in range(i_lo, i_hi + 2):
                a2 = i2 * res
                if a2 > hi:
                    a2 = hi
                a3 = rest - a2
                q = base + a2 * (lin + quad * a2)
                if sphere:
                    v = q - (a0 * gram[0, 0] + a1 * gram[1, 1]
                             + a2 * gram[2, 2] + a3 * gram[3, 3])
                else:
                    v = 0.5 * q
                if v < best:
                    best = v
    return best


def grid_dual_minimum(gram, lam, sphere, resolution=1e-3):
    """Brute-force minimum of a dual objective over {sum=1, box} by lattice scan."""
    gram = np.ascontiguousarray(gram, dtype=float)
    n = gram.shape[0]
    upper = 1.0 / (n * lam)
    if n == 2:
        return float(_scan_free1(gram, upper, resolution, sphere))
    if n == 3:
        return float(_scan_free2(gram, upper, resolution, sphere))
    if n == 4:
        return float(_scan_free3(gram, upper, resolution, sphere))
    raise ValueError(f"grid oracle supports n in 2..4, got {n}")


def random_psd_gram(rng, n, scale=0.5):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T) / n


def random_sequences(rng, n, p, d_lo, d_hi):
    """List of (p, d) arrays with uniformly random lengths."""
    return [rng.normal(size=(p, int(rng.integers(d_lo, d_hi + 1))))
            for _ in range(n)]

"""Hot numeric loops, written once in a form that compiles under numba.

Functions here are plain numpy and get wrapped by :mod:`seqsvm.kernels`
either as-is (fallback backend) or through ``numba.njit`` (accelerated
backend).  To keep both paths identical they avoid any construct outside
the numba-supported numpy subset: no dicts, no dataclasses, no closures,
no calls into other module functions.

Conventions shared by all kernels:
  - sequences are passed time-major as ``(d, p)`` C-contiguous arrays;
  - recurrent blocks are stacked ``(n_blocks, m, p)`` / ``(n_blocks, m, m)``;
  - LSTM block order is (candidate, input gate, forget gate, output gate);
  - GRU block order is (update gate, reset gate, candidate);
  - all floats are float64.

Sigmoids are evaluated through the overflow-free form
``exp(min(x, 0)) / (1 + exp(-|x|))`` so both backends stay warning-free
for arbitrarily large pre-activations.
"""

import numpy as np


def lstm_forward(x_seq, w_in, w_rec, bias):
    """Unroll an LSTM over one sequence, keeping per-step activations.

    Returns (H, C, Z, S, F, O): hidden states, cell states, candidate,
    input/forget/output gate activations, each of shape (d, m).
    """
    d = x_seq.shape[0]
    m = w_in.shape[1]
    ax0 = np.dot(x_seq, np.ascontiguousarray(w_in[0].T))
    ax1 = np.dot(x_seq, np.ascontiguousarray(w_in[1].T))
    ax2 = np.dot(x_seq, np.ascontiguousarray(w_in[2].T))
    ax3 = np.dot(x_seq, np.ascontiguousarray(w_in[3].T))
    hist_h = np.empty((d, m))
    hist_c = np.empty((d, m))
    hist_z = np.empty((d, m))
    hist_s = np.empty((d, m))
    hist_f = np.empty((d, m))
    hist_o = np.empty((d, m))
    h = np.zeros(m)
    c = np.zeros(m)
    for t in range(d):
        az = ax0[t] + np.dot(w_rec[0], h) + bias[0]
        as_ = ax1[t] + np.dot(w_rec[1], h) + bias[1]
        af = ax2[t] + np.dot(w_rec[2], h) + bias[2]
        ao = ax3[t] + np.dot(w_rec[3], h) + bias[3]
        z = np.tanh(az)
        s = np.exp(np.minimum(as_, 0.0)) / (1.0 + np.exp(-np.abs(as_)))
        f = np.exp(np.minimum(af, 0.0)) / (1.0 + np.exp(-np.abs(af)))
        o = np.exp(np.minimum(ao, 0.0)) / (1.0 + np.exp(-np.abs(ao)))
        c = s * z + f * c
        h = o * np.tanh(c)
        hist_h[t] = h
        hist_c[t] = c
        hist_z[t] = z
        hist_s[t] = s
        hist_f[t] = f
        hist_o[t] = o
    return hist_h, hist_c, hist_z, hist_s, hist_f, hist_o


def lstm_backward(x_seq, w_rec, hist_h, hist_c, hist_z, hist_s, hist_f, hist_o, d_h):
    """Reverse-mode sweep matching :func:`lstm_forward`.

    ``d_h`` holds the per-step upstream gradient flowing into each hidden
    state.  Returns stacked gradients (g_in, g_rec, g_bias) with the same
    block layout as the parameters.
    """
    d = x_seq.shape[0]
    p = x_seq.shape[1]
    m = hist_h.shape[1]
    wrt0 = np.ascontiguousarray(w_rec[0].T)
    wrt1 = np.ascontiguousarray(w_rec[1].T)
    wrt2 = np.ascontiguousarray(w_rec[2].T)
    wrt3 = np.ascontiguousarray(w_rec[3].T)
    dz_pre = np.empty((d, m))
    ds_pre = np.empty((d, m))
    df_pre = np.empty((d, m))
    do_pre = np.empty((d, m))
    carry_h = np.zeros(m)
    carry_c = np.zeros(m)
    zero = np.zeros(m)
    for t in range(d - 1, -1, -1):
        dh = d_h[t] + carry_h
        tc = np.tanh(hist_c[t])
        do = dh * tc
        do_pre[t] = do * hist_o[t] * (1.0 - hist_o[t])
        dc = carry_c + dh * hist_o[t] * (1.0 - tc * tc)
        ds = dc * hist_z[t]
        ds_pre[t] = ds * hist_s[t] * (1.0 - hist_s[t])
        dz = dc * hist_s[t]
        dz_pre[t] = dz * (1.0 - hist_z[t] * hist_z[t])
        if t > 0:
            df = dc * hist_c[t - 1]
        else:
            df = dc * zero
        df_pre[t] = df * hist_f[t] * (1.0 - hist_f[t])
        carry_c = dc * hist_f[t]
        carry_h = (
            np.dot(wrt0, dz_pre[t])
            + np.dot(wrt1, ds_pre[t])
            + np.dot(wrt2, df_pre[t])
            + np.dot(wrt3, do_pre[t])
        )
    h_prev = np.zeros((d, m))
    h_prev[1:] = hist_h[: d - 1]
    g_in = np.empty((4, m, p))
    g_rec = np.empty((4, m, m))
    g_bias = np.empty((4, m))
    g_in[0] = np.dot(np.ascontiguousarray(dz_pre.T), x_seq)
    g_in[1] = np.dot(np.ascontiguousarray(ds_pre.T), x_seq)
    g_in[2] = np.dot(np.ascontiguousarray(df_pre.T), x_seq)
    g_in[3] = np.dot(np.ascontiguousarray(do_pre.T), x_seq)
    g_rec[0] = np.dot(np.ascontiguousarray(dz_pre.T), h_prev)
    g_rec[1] = np.dot(np.ascontiguousarray(ds_pre.T), h_prev)
    g_rec[2] = np.dot(np.ascontiguousarray(df_pre.T), h_prev)
    g_rec[3] = np.dot(np.ascontiguousarray(do_pre.T), h_prev)
    g_bias[0] = dz_pre.sum(axis=0)
    g_bias[1] = ds_pre.sum(axis=0)
    g_bias[2] = df_pre.sum(axis=0)
    g_bias[3] = do_pre.sum(axis=0)
    return g_in, g_rec, g_bias


def gru_forward(x_seq, w_in, w_rec):
    """Unroll a bias-free GRU over one sequence, keeping per-step activations.

    Returns (H, Z, R, N, RH): hidden states, update gates, reset gates,
    candidates, and the raw recurrent candidate pre-mix (needed on the
    backward pass), each of shape (d, m).
    """
    d = x_seq.shape[0]
    m = w_in.shape[1]
    ax0 = np.dot(x_seq, np.ascontiguousarray(w_in[0].T))
    ax1 = np.dot(x_seq, np.ascontiguousarray(w_in[1].T))
    ax2 = np.dot(x_seq, np.ascontiguousarray(w_in[2].T))
    hist_h = np.empty((d, m))
    hist_z = np.empty((d, m))
    hist_r = np.empty((d, m))
    hist_n = np.empty((d, m))
    hist_rh = np.empty((d, m))
    h = np.zeros(m)
    for t in range(d):
        az = ax0[t] + np.dot(w_rec[0], h)
        ar = ax1[t] + np.dot(w_rec[1], h)
        z = np.exp(np.minimum(az, 0.0)) / (1.0 + np.exp(-np.abs(az)))
        r = np.exp(np.minimum(ar, 0.0)) / (1.0 + np.exp(-np.abs(ar)))
        rh = np.dot(w_rec[2], h)
        n = np.tanh(ax2[t] + r * rh)
        h = n * z + h * (1.0 - z)
        hist_h[t] = h
        hist_z[t] = z
        hist_r[t] = r
        hist_n[t] = n
        hist_rh[t] = rh
    return hist_h, hist_z, hist_r, hist_n, hist_rh


def gru_backward(x_seq, w_rec, hist_h, hist_z, hist_r, hist_n, hist_rh, d_h):
    """Reverse-mode sweep matching :func:`gru_forward`.

    Returns stacked gradients (g_in, g_rec).
    """
    d = x_seq.shape[0]
    p = x_seq.shape[1]
    m = hist_h.shape[1]
    wrt0 = np.ascontiguousarray(w_rec[0].T)
    wrt1 = np.ascontiguousarray(w_rec[1].T)
    wrt2 = np.ascontiguousarray(w_rec[2].T)
    dz_pre = np.empty((d, m))
    dr_pre = np.empty((d, m))
    dn_eff = np.empty((d, m))  # candidate pre-activation grad, reused for both weight grads
    carry = np.zeros(m)
    zero = np.zeros(m)
    for t in range(d - 1, -1, -1):
        dh = d_h[t] + carry
        if t > 0:
            h_prev = hist_h[t - 1]
        else:
            h_prev = zero
        dn = dh * hist_z[t]
        dz = dh * (hist_n[t] - h_prev)
        dz_pre[t] = dz * hist_z[t] * (1.0 - hist_z[t])
        dn_pre = dn * (1.0 - hist_n[t] * hist_n[t])
        dn_eff[t] = dn_pre
        dr = dn_pre * hist_rh[t]
        dr_pre[t] = dr * hist_r[t] * (1.0 - hist_r[t])
        carry = (
            dh * (1.0 - hist_z[t])
            + np.dot(wrt0, dz_pre[t])
            + np.dot(wrt1, dr_pre[t])
            + np.dot(wrt2, dn_pre * hist_r[t])
        )
    h_prev_all = np.zeros((d, m))
    h_prev_all[1:] = hist_h[: d - 1]
    g_in = np.empty((3, m, p))
    g_rec = np.empty((3, m, m))
    g_in[0] = np.dot(np.ascontiguousarray(dz_pre.T), x_seq)
    g_in[1] = np.dot(np.ascontiguousarray(dr_pre.T), x_seq)
    g_in[2] = np.dot(np.ascontiguousarray(dn_eff.T), x_seq)
    g_rec[0] = np.dot(np.ascontiguousarray(dz_pre.T), h_prev_all)
    g_rec[1] = np.dot(np.ascontiguousarray(dr_pre.T), h_prev_all)
    gated = dn_eff * hist_r
    g_rec[2] = np.dot(np.ascontiguousarray(gated.T), h_prev_all)
    return g_in, g_rec


def smo_apply_pairs(alpha, gram, upper, pairs, sphere_form):
    """Run pairwise coordinate updates on the box-simplex dual in place.

    Each pair (a, b) is moved to the exact minimizer of the dual objective
    along the feasible segment that keeps ``alpha[a] + alpha[b]`` constant.
    ``sphere_form`` selects the hypersphere dual (quadratic minus diagonal)
    instead of the half-quadratic hyperplane dual.  Pairs whose curvature
    along the segment is zero are skipped.  Returns the number of pairs
    actually moved.
    """
    n = alpha.shape[0]
    kalpha = np.dot(gram, alpha)
    moved = 0
    for idx in range(pairs.shape[0]):
        a = pairs[idx, 0]
        b = pairs[idx, 1]
        kaa = gram[a, a]
        kbb = gram[b, b]
        kab = gram[a, b]
        denom = kaa + kbb - 2.0 * kab
        if denom <= 1e-14 * (kaa + kbb + 1e-300):
            continue
        s = alpha[a] + alpha[b]
        ma = kalpha[a] - kaa * alpha[a] - kab * alpha[b]
        mb = kalpha[b] - kab * alpha[a] - kbb * alpha[b]
        if sphere_form:
            new_b = (2.0 * s * (kaa - kab) + kbb - kaa + 2.0 * (ma - mb)) / (2.0 * denom)
        else:
            new_b = (s * (kaa - kab) + ma - mb) / denom
        lo = s - upper
        if lo < 0.0:
            lo = 0.0
        hi = upper
        if s < hi:
            hi = s
        if new_b < lo:
            new_b = lo
        elif new_b > hi:
            new_b = hi
        new_a = s - new_b
        da = new_a - alpha[a]
        db = new_b - alpha[b]
        if da != 0.0 or db != 0.0:
            kalpha += gram[a] * da + gram[b] * db
            alpha[a] = new_a
            alpha[b] = new_b
            moved += 1
    return moved

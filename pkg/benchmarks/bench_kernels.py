"""Side-by-side timing of the hot kernels on both backends.

Runs the recurrent unroll/reverse-sweep pairs and the pairwise dual
update on the plain-numpy path and, when numba is importable, on the
compiled path, then prints per-call medians and the speedup.  A warmup
call per kernel keeps JIT compilation out of the timings.

Usage:
    python3 benchmarks/bench_kernels.py [--m 32] [--p 8] [--d 200]
        [--n-seq 32] [--n-dual 300] [--repeats 7]
"""

import argparse
import statistics
import time

import numpy as np

from seqsvm import kernels
from seqsvm._smo import pair_order
from seqsvm.rnn import GRU, LSTM, init_params


def _median_seconds(fn, repeats):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def _recurrent_case(cell, args, rng):
    params = init_params(cell, args.m, args.p, seed=1)
    seqs = [np.ascontiguousarray(rng.normal(size=(args.d, args.p)))
            for _ in range(args.n_seq)]
    d_h = np.full((args.d, args.m), 1.0 / args.d)

    def run(table):
        if cell == LSTM:
            for x in seqs:
                state = table["lstm_forward"](x, params.w_in, params.w_rec,
                                              params.bias)
                table["lstm_backward"](x, params.w_rec, *state, d_h)
        else:
            for x in seqs:
                state = table["gru_forward"](x, params.w_in, params.w_rec)
                table["gru_backward"](x, params.w_rec, *state, d_h)

    return run


def _dual_case(args, rng):
    base = rng.normal(size=(args.n_dual, args.n_dual))
    gram = base @ base.T / args.n_dual
    pairs = pair_order(args.n_dual)
    upper = 1.0 / (args.n_dual * 0.5)

    def run(table):
        alpha = np.full(args.n_dual, 1.0 / args.n_dual)
        table["smo_apply_pairs"](alpha, gram, upper, pairs, False)
        table["smo_apply_pairs"](alpha, gram, upper, pairs, True)

    return run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=32, help="hidden width")
    parser.add_argument("--p", type=int, default=8, help="input width")
    parser.add_argument("--d", type=int, default=200, help="sequence length")
    parser.add_argument("--n-seq", type=int, default=32,
                        help="sequences per recurrent timing")
    parser.add_argument("--n-dual", type=int, default=300,
                        help="multipliers in the dual sweep")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    cases = [
        ("lstm fwd+bwd", _recurrent_case(LSTM, args, rng)),
        ("gru fwd+bwd", _recurrent_case(GRU, args, rng)),
        ("smo sweep x2", _dual_case(args, rng)),
    ]

    tables = {"numpy": kernels.get_backend("numpy")}
    try:
        tables["numba"] = kernels.get_backend("numba")
    except ImportError:
        print("numba not importable; timing the numpy path only")

    print(f"m={args.m} p={args.p} d={args.d} n_seq={args.n_seq} "
          f"n_dual={args.n_dual} repeats={args.repeats}")
    header = f"{'case':<14}" + "".join(f"{name:>12}" for name in tables)
    if len(tables) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, case in cases:
        timings = {}
        for name, table in tables.items():
            case(table)  # warmup; compiles on the numba path
            timings[name] = _median_seconds(lambda: case(table), args.repeats)
        row = f"{label:<14}" + "".join(
            f"{timings[name] * 1e3:>10.2f}ms" for name in tables)
        if len(timings) == 2:
            row += f"{timings['numpy'] / timings['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()

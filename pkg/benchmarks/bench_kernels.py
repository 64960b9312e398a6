"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 50]

Numba timings exclude compilation (one warm-up call per kernel).
"""

import argparse
import timeit

import numpy as np

from ingtag._kernels import BACKENDS


def cases(rng):
    n_labels = 8
    s = 12
    emit = rng.normal(size=(s, n_labels))
    trans = rng.normal(size=(n_labels, n_labels))
    start, stop = rng.normal(size=n_labels), rng.normal(size=n_labels)
    yield "viterbi (s=12, L=8)", "viterbi", (emit, trans, start, stop)

    n_feat = 20_000
    w = rng.normal(size=(n_feat, n_labels))
    indptr = np.arange(0, 14 * s + 1, 14, dtype=np.int64)
    ids = rng.integers(0, n_feat, indptr[-1]).astype(np.int64)
    yield "emission_scores (12 tokens x 14 feats)", "emission_scores", (indptr, ids, w)

    gold = rng.integers(0, n_labels, s).astype(np.int64)
    pred = rng.integers(0, n_labels, s).astype(np.int64)
    acc = np.zeros_like(w)
    yield "perceptron_update", "perceptron_update", (w, acc, indptr, ids, gold, pred, 3.0)

    p = rng.normal(size=300 * 300)
    g = rng.normal(size=p.size)
    m, v = np.zeros_like(p), np.zeros_like(p)
    yield "adam_update (90k params)", "adam_update", (p, g, m, v, 5e-5, 0.9, 0.999, 1e-8, 0.1, 0.001)

    table = np.zeros((5000, 300))
    idx = rng.integers(-1, 5000, 12).astype(np.int64)
    src = rng.normal(size=(12, 300))
    yield "scatter_add_rows (12 x 300)", "scatter_add_rows", (table, idx, src)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args()
    if "numba" not in BACKENDS:
        print("numba not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<40} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for label, name, call_args in cases(rng):
        times = {}
        for backend in ("numpy", "numba"):
            fn = BACKENDS[backend][name]
            fn(*call_args)
            best = min(timeit.repeat(lambda: fn(*call_args), repeat=args.repeat, number=args.number))
            times[backend] = 1e6 * best / args.number
        print(f"{label:<40} {times['numpy']:10.2f} {times['numba']:10.2f} {times['numpy'] / times['numba']:8.1f}x")


if __name__ == "__main__":
    main()

"""Hot inner loops with two interchangeable backends.

Each kernel exists as a numba ``@njit`` function and as a pure-numpy
function with the same signature.  The module-level names resolve to the
numba versions unless numba is missing or ``INGTAG_DISABLE_NUMBA`` is set
to a truthy value before import.  ``benchmarks/bench_kernels.py`` times
both.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disabled() -> bool:
    return os.environ.get("INGTAG_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def viterbi_numpy(emit, trans, start, stop):
    """Best label path under emission/transition/start/stop scores.

    Returns ``(path, score)``.  Ties go to the lowest label index, both in
    each backpointer and in the final state.
    """
    s, n = emit.shape
    backptr = np.zeros((s, n), dtype=np.int64)
    delta = start + emit[0]
    for t in range(1, s):
        cand = delta[:, None] + trans
        best = np.argmax(cand, axis=0)
        backptr[t] = best
        delta = cand[best, np.arange(n)] + emit[t]
    final = delta + stop
    last = int(np.argmax(final))
    path = np.empty(s, dtype=np.int64)
    path[-1] = last
    for t in range(s - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(final[last])


def emission_scores_numpy(indptr, feat_ids, weights):
    s = indptr.shape[0] - 1
    out = np.zeros((s, weights.shape[1]))
    for t in range(s):
        for k in range(indptr[t], indptr[t + 1]):
            out[t] += weights[feat_ids[k]]
    return out


def perceptron_update_numpy(weights, accum, indptr, feat_ids, gold, pred, c):
    for t in range(indptr.shape[0] - 1):
        g = gold[t]
        p = pred[t]
        if g == p:
            continue
        ids = feat_ids[indptr[t]:indptr[t + 1]]
        # duplicates within one position must count twice
        np.add.at(weights[:, g], ids, 1.0)
        np.add.at(weights[:, p], ids, -1.0)
        np.add.at(accum[:, g], ids, c)
        np.add.at(accum[:, p], ids, -c)


def adam_update_numpy(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def scatter_add_rows_numpy(target, idx, src):
    keep = idx >= 0
    np.add.at(target, idx[keep], src[keep])


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def viterbi_numba(emit, trans, start, stop):
        s, n = emit.shape
        backptr = np.zeros((s, n), dtype=np.int64)
        delta = np.empty(n)
        nxt = np.empty(n)
        for c in range(n):
            delta[c] = start[c] + emit[0, c]
        for t in range(1, s):
            for c in range(n):
                best = 0
                best_score = delta[0] + trans[0, c]
                for p in range(1, n):
                    sc = delta[p] + trans[p, c]
                    if sc > best_score:
                        best_score = sc
                        best = p
                backptr[t, c] = best
                nxt[c] = best_score + emit[t, c]
            for c in range(n):
                delta[c] = nxt[c]
        last = 0
        last_score = delta[0] + stop[0]
        for c in range(1, n):
            sc = delta[c] + stop[c]
            if sc > last_score:
                last_score = sc
                last = c
        path = np.empty(s, dtype=np.int64)
        path[s - 1] = last
        for t in range(s - 1, 0, -1):
            path[t - 1] = backptr[t, path[t]]
        return path, last_score

    @numba.njit(cache=True)
    def emission_scores_numba(indptr, feat_ids, weights):
        s = indptr.shape[0] - 1
        n = weights.shape[1]
        out = np.zeros((s, n))
        for t in range(s):
            for k in range(indptr[t], indptr[t + 1]):
                f = feat_ids[k]
                for c in range(n):
                    out[t, c] += weights[f, c]
        return out

    @numba.njit(cache=True)
    def perceptron_update_numba(weights, accum, indptr, feat_ids, gold, pred, c):
        for t in range(indptr.shape[0] - 1):
            g = gold[t]
            p = pred[t]
            if g == p:
                continue
            for k in range(indptr[t], indptr[t + 1]):
                f = feat_ids[k]
                weights[f, g] += 1.0
                weights[f, p] -= 1.0
                accum[f, g] += c
                accum[f, p] -= c

    @numba.njit(cache=True)
    def adam_update_numba(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
        # flat contiguous views expected; see tensor.Adam
        for i in range(param.shape[0]):
            gi = grad[i]
            m[i] = m[i] * beta1 + (1.0 - beta1) * gi
            v[i] = v[i] * beta2 + (1.0 - beta2) * (gi * gi)
            param[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)

    @numba.njit(cache=True)
    def scatter_add_rows_numba(target, idx, src):
        d = target.shape[1]
        for i in range(idx.shape[0]):
            r = idx[i]
            if r < 0:
                continue
            for j in range(d):
                target[r, j] += src[i, j]


BACKENDS = {
    "numpy": {
        "viterbi": viterbi_numpy,
        "emission_scores": emission_scores_numpy,
        "perceptron_update": perceptron_update_numpy,
        "adam_update": adam_update_numpy,
        "scatter_add_rows": scatter_add_rows_numpy,
    }
}
if numba is not None:
    BACKENDS["numba"] = {
        "viterbi": viterbi_numba,
        "emission_scores": emission_scores_numba,
        "perceptron_update": perceptron_update_numba,
        "adam_update": adam_update_numba,
        "scatter_add_rows": scatter_add_rows_numba,
    }

BACKEND = "numba" if (numba is not None and not _env_disabled()) else "numpy"

viterbi = BACKENDS[BACKEND]["viterbi"]
emission_scores = BACKENDS[BACKEND]["emission_scores"]
perceptron_update = BACKENDS[BACKEND]["perceptron_update"]
adam_update = BACKENDS[BACKEND]["adam_update"]
scatter_add_rows = BACKENDS[BACKEND]["scatter_add_rows"]

"""Scalar triple-loop cross-attention oracle (no numpy vectorization).

Transcribes the block definition with explicit index loops; shared by the
merge unit tests and the acceptance suite.
"""

from __future__ import annotations

import math

from chemtext.merge import MergeParams


def matmul_loops(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i][t] * b[t][j]
            out[i][j] = s
    return out


def softmax_rows_loops(scores):
    out = []
    for row in scores:
        peak = max(row)
        exps = [math.exp(x - peak) for x in row]
        total = sum(exps)
        out.append([e / total for e in exps])
    return out


def cross_attend_loops(h_t, h_m, w_q, w_k, w_v):
    q = matmul_loops(h_t, w_q)
    k = matmul_loops(h_m, w_k)
    v = matmul_loops(h_m, w_v)
    d = len(w_q[0])
    scores = [
        [sum(q[i][t] * k[j][t] for t in range(d)) / math.sqrt(d) for j in range(len(k))]
        for i in range(len(q))
    ]
    weights = softmax_rows_loops(scores)
    return matmul_loops(weights, v)


def random_instance(rng, n_t=3, h_t=4, n_m=2, h_m=5, d=3):
    h_t_mat = rng.normal(size=(n_t, h_t))
    h_m_mat = rng.normal(size=(n_m, h_m))
    params = MergeParams(
        w_q=rng.normal(size=(h_t, d)),
        w_k=rng.normal(size=(h_m, d)),
        w_v=rng.normal(size=(h_m, d)),
    )
    return h_t_mat, h_m_mat, params

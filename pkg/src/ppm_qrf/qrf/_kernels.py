"""Compiled inner loops for tree growth and forest queries.

All functions are ``nogil`` so trees and prediction batches can run on a
thread pool.  Randomness inside tree growth comes from a splitmix64 stream
seeded per tree, never from numba's global generator.
"""

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x`` (pure Python, for seeding)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@njit(cache=True, nogil=True)
def _next(state):
    # state is a length-1 uint64 array
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _randbelow(state, k):
    u = (_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    r = int(u * k)
    return r if r < k else k - 1


@njit(cache=True, nogil=True)
def best_split(XT, y, idx, features):
    """Best variance-reduction split of ``idx`` over ``features``.

    ``XT`` is the feature matrix transposed (features x rows).
    ``features`` must be sorted ascending.  Returns (feature, threshold, gain)
    with feature = -1 when no split reduces the within-node sum of squares.
    Ties keep the lowest feature index, then the lowest threshold.
    """
    m = idx.shape[0]
    total = 0.0
    for j in range(m):
        total += y[idx[j]]
    parent = total * total / m
    best_f = -1
    best_t = 0.0
    best_gain = 0.0
    vals = np.empty(m)
    ys = np.empty(m)
    for f in features:
        binary = True
        n_one = 0
        sum_one = 0.0
        for j in range(m):
            v = XT[f, idx[j]]
            vals[j] = v
            if v == 1.0:
                n_one += 1
                sum_one += y[idx[j]]
            elif v != 0.0:
                binary = False
        if binary:
            # 0/1 column: the only candidate is the 0.5 midpoint
            if n_one == 0 or n_one == m:
                continue
            left = total - sum_one
            nl = m - n_one
            score = left * left / nl + sum_one * sum_one / n_one
            gain = score - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_t = 0.5
            continue
        order = np.argsort(vals)
        for j in range(m):
            ys[j] = y[idx[order[j]]]
        left = 0.0
        for j in range(m - 1):
            left += ys[j]
            a = vals[order[j]]
            b = vals[order[j + 1]]
            if a == b:
                continue
            nl = j + 1
            nr = m - nl
            right = total - left
            score = left * left / nl + right * right / nr
            gain = score - parent
            if gain > best_gain:
                thr = 0.5 * (a + b)
                if thr >= b:
                    thr = a
                best_gain = gain
                best_f = f
                best_t = thr
    # guard against rounding noise on (near-)constant targets
    if best_f >= 0 and best_gain <= 1e-12 * max(abs(parent), 1.0):
        best_f = -1
    return best_f, best_t, best_gain


@njit(cache=True, nogil=True)
def grow_tree(XT, y, sample, mtry, min_n, seed):
    """Grow one CART regression tree on row indices ``sample``.

    Returns (feature, threshold, left, right, n_nodes); leaves have feature -1.
    """
    p = XT.shape[0]
    cap = 2 * sample.shape[0] + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.arange(p)

    # explicit stack of (node id, start, stop) into a working copy of sample
    work = sample.copy()
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = work.shape[0]
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        if m < min_n or m < 2:
            continue
        ymin = y[work[lo]]
        ymax = ymin
        for j in range(lo, hi):
            v = y[work[j]]
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        if ymin == ymax:
            continue
        # partial Fisher-Yates for mtry features without replacement
        for j in range(mtry):
            r = j + _randbelow(state, p - j)
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
        feats = np.sort(perm[:mtry].copy())
        seg = work[lo:hi]
        f, thr, gain = best_split(XT, y, seg, feats)
        if f < 0:
            continue
        # stable partition of the segment
        buf_l = np.empty(m, dtype=np.int64)
        buf_r = np.empty(m, dtype=np.int64)
        nl = 0
        nr = 0
        for j in range(m):
            r = seg[j]
            if XT[f, r] <= thr:
                buf_l[nl] = r
                nl += 1
            else:
                buf_r[nr] = r
                nr += 1
        if nl == 0 or nr == 0:
            continue
        for j in range(nl):
            work[lo + j] = buf_l[j]
        for j in range(nr):
            work[lo + nl + j] = buf_r[j]
        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is expanded first
        stack_node[top] = n_nodes + 1
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
        n_nodes += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], n_nodes


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf node id reached by every row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def _weighted_select(ranks, weights, m, target):
    """Smallest rank r with sum(weights[ranks <= r]) >= target.

    Three-way quickselect over the first ``m`` entries (reordered in place).
    """
    lo = 0
    hi = m
    acc = 0.0
    while True:
        pivot = ranks[lo + (hi - lo) // 2]
        # partition [lo, hi) into < pivot | == pivot | > pivot
        lt = lo
        gt = hi
        i = lo
        w_less = 0.0
        w_eq = 0.0
        while i < gt:
            r = ranks[i]
            if r < pivot:
                w_less += weights[i]
                ranks[i], ranks[lt] = ranks[lt], ranks[i]
                weights[i], weights[lt] = weights[lt], weights[i]
                lt += 1
                i += 1
            elif r > pivot:
                gt -= 1
                ranks[i], ranks[gt] = ranks[gt], ranks[i]
                weights[i], weights[gt] = weights[gt], weights[i]
            else:
                w_eq += weights[i]
                i += 1
        if acc + w_less >= target and lt > lo:
            hi = lt
        elif acc + w_less + w_eq >= target or gt == hi:
            return pivot
        else:
            acc += w_less + w_eq
            lo = gt


@njit(cache=True, nogil=True)
def predict_rows(X, roots, nodes,
                 leaf_ptr, leaf_ranks, leaf_mean, uniq, alphas, tol):
    """Mean and quantiles for every row of ``X`` over a packed forest.

    Nodes of all trees live in one (n_nodes, 4) array of (feature,
    threshold, left, right) rows; ``roots[t]`` is tree t's root.
    ``leaf_ptr``/``leaf_ranks`` is a CSR map from node id to the dense ranks
    (into ``uniq``) of the leaf's training members.  Each quantile is the
    smallest rank whose pooled weight reaches alpha.
    """
    n = X.shape[0]
    k = roots.shape[0]
    n_alpha = alphas.shape[0]
    mean = np.empty(n)
    quant = np.empty((n, n_alpha))
    leaves = np.empty(k, dtype=np.int64)
    buf_r = np.empty(1024, dtype=np.int64)
    buf_w = np.empty(1024)
    for i in range(n):
        acc = 0.0
        m = 0
        for t in range(k):
            node = roots[t]
            f = int(nodes[node, 0])
            while f >= 0:
                if X[i, f] <= nodes[node, 1]:
                    node = int(nodes[node, 2])
                else:
                    node = int(nodes[node, 3])
                f = int(nodes[node, 0])
            leaves[t] = node
            acc += leaf_mean[node]
            m += leaf_ptr[node + 1] - leaf_ptr[node]
        mean[i] = acc / k
        if m > buf_r.shape[0]:
            buf_r = np.empty(2 * m, dtype=np.int64)
            buf_w = np.empty(2 * m)
        j = 0
        for t in range(k):
            s = leaf_ptr[leaves[t]]
            e = leaf_ptr[leaves[t] + 1]
            w = 1.0 / ((e - s) * k)
            for q in range(s, e):
                buf_r[j] = leaf_ranks[q]
                buf_w[j] = w
                j += 1
        # selection only permutes the buffer, so it is reused across alphas
        for a in range(n_alpha):
            quant[i, a] = uniq[_weighted_select(buf_r, buf_w, m, alphas[a] - tol)]
    return mean, quant

"""Pure-Python/numpy versions of the compiled kernels.

Tree growth consumes the same splitmix64 stream and scores splits with the
same integer-count arithmetic as the compiled code, so forests are
bit-identical across backends.  The SVM solver follows the same update order
but uses numpy dot products, so its output agrees only to rounding.
"""
from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next() % n


def grow_tree(X, y, weight, n_classes, mtry, min_leaf, seed):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.int64)
    d = X.shape[1]
    rng = SplitMix64(seed)
    inbag = np.flatnonzero(weight > 0)
    if inbag.size == 0:
        raise ValueError("no in-bag rows")
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    new_node()
    stack = [(0, inbag)]
    while stack:
        node, rows = stack.pop()
        yw = y[rows]
        ww = weight[rows].astype(np.float64)
        tcount = np.bincount(yw, weights=ww, minlength=n_classes).astype(np.float64)
        counts[node] = tcount
        wtot = float(tcount.sum())
        if np.count_nonzero(tcount) < 2 or wtot < 2.0 * min_leaf:
            continue

        perm = list(range(d))
        best_score, best_f, best_thr = -1.0, -1, 0.0
        evaluated = j = 0
        onehot = np.zeros((rows.size, n_classes))
        onehot[np.arange(rows.size), yw] = ww
        while j < d and evaluated < mtry:
            pos = j + rng.below(d - j)
            f = perm[pos]
            perm[pos] = perm[j]
            perm[j] = f
            j += 1
            xv = X[rows, f]
            order = np.argsort(xv, kind="stable")
            xs = xv[order]
            if xs[0] == xs[-1]:
                continue
            evaluated += 1
            lc = np.cumsum(onehot[order], axis=0)[:-1]
            wl = np.cumsum(ww[order])[:-1]
            wr = wtot - wl
            valid = (xs[:-1] != xs[1:]) & (wl >= min_leaf) & (wr >= min_leaf)
            if not valid.any():
                continue
            sl = np.zeros(lc.shape[0])
            sr = np.zeros(lc.shape[0])
            for c in range(n_classes):
                rc = tcount[c] - lc[:, c]
                sl = sl + lc[:, c] * lc[:, c]
                sr = sr + rc * rc
            with np.errstate(divide="ignore", invalid="ignore"):
                score = sl / wl + sr / wr
            score[~valid] = -np.inf
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = float(score[i])
                best_f = f
                thr = 0.5 * (xs[i] + xs[i + 1])
                if thr >= xs[i + 1]:
                    thr = xs[i]
                best_thr = float(thr)
        if best_f < 0:
            continue
        go_left = X[rows, best_f] <= best_thr
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node] = best_f, best_thr
        left[node], right[node] = lnode, rnode
        stack.append((rnode, rows[~go_left]))
        stack.append((lnode, rows[go_left]))

    return (np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            np.vstack(counts).astype(np.float64))


def tree_leaf_votes(feature, threshold, left, right, counts, X):
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return np.argmax(counts[node], axis=1).astype(np.int64)


def svm_dual_cd(X, y, C, max_epochs, tol, seed):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    rng = SplitMix64(seed)
    w = np.zeros(d)
    alpha = np.zeros(n)
    qii = np.einsum("ij,ij->i", X, X)
    order = list(range(n))
    trace = []
    gap, converged = 0.0, False
    for _ in range(max_epochs):
        for k in range(n - 1, 0, -1):
            pos = rng.below(k + 1)
            order[k], order[pos] = order[pos], order[k]
        for i in order:
            if qii[i] <= 0.0:
                continue
            g = y[i] * float(w @ X[i]) - 1.0
            a = alpha[i]
            pg = min(g, 0.0) if a <= 0.0 else max(g, 0.0) if a >= C else g
            if pg != 0.0:
                a_new = min(max(a - g / qii[i], 0.0), C)
                alpha[i] = a_new
                w += (a_new - a) * y[i] * X[i]
        wsq = float(w @ w)
        hinge = float(np.maximum(0.0, 1.0 - y * (X @ w)).sum())
        primal = 0.5 * wsq + C * hinge
        dual = float(alpha.sum()) - 0.5 * wsq
        trace.append(dual)
        gap = primal - dual
        if gap <= tol * primal:
            converged = True
            break
    return w, alpha, np.array(trace), gap, len(trace), converged

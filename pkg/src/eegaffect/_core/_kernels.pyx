# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: CART tree growth, forest voting, and linear SVM dual
coordinate descent.  Must stay bit-compatible with ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef inline uint64_t _splitmix_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t _randbelow(uint64_t* state, Py_ssize_t n) noexcept nogil:
    return <Py_ssize_t>(_splitmix_next(state) % <uint64_t>n)


ctypedef struct Pair:
    double value
    Py_ssize_t index


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).value
    cdef double vb = (<Pair*>b).value
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


def grow_tree(const double[:, ::1] X, const int64_t[::1] y, const int64_t[::1] weight,
              Py_ssize_t n_classes, Py_ssize_t mtry, Py_ssize_t min_leaf, uint64_t seed):
    """Grow one CART tree on the rows with positive ``weight``.

    Returns (feature, threshold, left, right, counts); leaves have feature -1.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t n_in = 0, i, j, c, f, pos, start, end, node, visited, evaluated
    cdef Py_ssize_t cap = 0, n_nodes, stack_top, best_f, best_pos, mid, lo, hi
    cdef double wtot, sl, sr, wl, wr, score, best_score, thr, best_thr
    cdef uint64_t state = seed
    cdef int64_t* idx
    cdef int64_t* tmp
    cdef Py_ssize_t* perm
    cdef double* lcount
    cdef double* tcount
    cdef Pair* pairs
    cdef Py_ssize_t* stack_node
    cdef Py_ssize_t* stack_start
    cdef Py_ssize_t* stack_end

    for i in range(n):
        if weight[i] > 0:
            n_in += 1
    if n_in == 0:
        raise ValueError("no in-bag rows")
    cap = 2 * n_in + 1

    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, n_classes), dtype=np.float64)
    cdef int64_t[::1] feat_v = feature
    cdef double[::1] thr_v = threshold
    cdef int64_t[::1] left_v = left
    cdef int64_t[::1] right_v = right
    cdef double[:, ::1] cnt_v = counts

    idx = <int64_t*>malloc(n_in * sizeof(int64_t))
    tmp = <int64_t*>malloc(n_in * sizeof(int64_t))
    perm = <Py_ssize_t*>malloc(d * sizeof(Py_ssize_t))
    lcount = <double*>malloc(n_classes * sizeof(double))
    tcount = <double*>malloc(n_classes * sizeof(double))
    pairs = <Pair*>malloc(n_in * sizeof(Pair))
    stack_node = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    stack_start = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    stack_end = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    try:
        with nogil:
            j = 0
            for i in range(n):
                if weight[i] > 0:
                    idx[j] = i
                    j += 1
            n_nodes = 1
            stack_top = 0
            stack_node[0] = 0
            stack_start[0] = 0
            stack_end[0] = n_in
            while stack_top >= 0:
                node = stack_node[stack_top]
                start = stack_start[stack_top]
                end = stack_end[stack_top]
                stack_top -= 1

                for c in range(n_classes):
                    tcount[c] = 0.0
                for i in range(start, end):
                    tcount[y[idx[i]]] += <double>weight[idx[i]]
                wtot = 0.0
                visited = 0
                for c in range(n_classes):
                    cnt_v[node, c] = tcount[c]
                    wtot += tcount[c]
                    if tcount[c] > 0:
                        visited += 1
                if visited < 2 or wtot < 2.0 * min_leaf:
                    continue

                for f in range(d):
                    perm[f] = f
                best_score = -1.0
                best_f = -1
                best_thr = 0.0
                evaluated = 0
                j = 0
                while j < d and evaluated < mtry:
                    pos = j + _randbelow(&state, d - j)
                    f = perm[pos]
                    perm[pos] = perm[j]
                    perm[j] = f
                    j += 1
                    for i in range(start, end):
                        pairs[i - start].value = X[idx[i], f]
                        pairs[i - start].index = idx[i]
                    qsort(pairs, end - start, sizeof(Pair), _cmp_pair)
                    if pairs[0].value == pairs[end - start - 1].value:
                        continue
                    evaluated += 1
                    for c in range(n_classes):
                        lcount[c] = 0.0
                    wl = 0.0
                    for i in range(end - start - 1):
                        lcount[y[pairs[i].index]] += <double>weight[pairs[i].index]
                        wl += <double>weight[pairs[i].index]
                        if pairs[i].value == pairs[i + 1].value:
                            continue
                        wr = wtot - wl
                        if wl < min_leaf or wr < min_leaf:
                            continue
                        sl = 0.0
                        sr = 0.0
                        for c in range(n_classes):
                            sl = sl + lcount[c] * lcount[c]
                            sr = sr + (tcount[c] - lcount[c]) * (tcount[c] - lcount[c])
                        score = sl / wl + sr / wr
                        if score > best_score:
                            best_score = score
                            best_f = f
                            thr = 0.5 * (pairs[i].value + pairs[i + 1].value)
                            if thr >= pairs[i + 1].value:
                                thr = pairs[i].value
                            best_thr = thr
                if best_f < 0:
                    continue

                lo = start
                hi = end - 1
                mid = 0
                for i in range(start, end):
                    if X[idx[i], best_f] <= best_thr:
                        tmp[lo] = idx[i]
                        lo += 1
                    else:
                        tmp[hi] = idx[i]
                        hi -= 1
                # right block was filled back to front; restore original order
                for i in range(start, lo):
                    idx[i] = tmp[i]
                for i in range(lo, end):
                    idx[i] = tmp[end - 1 - (i - lo)]
                feat_v[node] = best_f
                thr_v[node] = best_thr
                left_v[node] = n_nodes
                right_v[node] = n_nodes + 1
                stack_top += 1
                stack_node[stack_top] = n_nodes + 1
                stack_start[stack_top] = lo
                stack_end[stack_top] = end
                stack_top += 1
                stack_node[stack_top] = n_nodes
                stack_start[stack_top] = start
                stack_end[stack_top] = lo
                n_nodes += 2
    finally:
        free(idx)
        free(tmp)
        free(perm)
        free(lcount)
        free(tcount)
        free(pairs)
        free(stack_node)
        free(stack_start)
        free(stack_end)
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


def tree_leaf_votes(const int64_t[::1] feature, const double[::1] threshold,
                    const int64_t[::1] left, const int64_t[::1] right,
                    const double[:, ::1] counts, const double[:, ::1] X):
    """Class voted by the tree for each row (argmax of leaf counts, lowest index on ties)."""
    cdef Py_ssize_t n = X.shape[0], k = counts.shape[1], i, c, node, best
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out_v = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            best = 0
            for c in range(1, k):
                if counts[node, c] > counts[node, best]:
                    best = c
            out_v[i] = best
    return out


def svm_dual_cd(const double[:, ::1] X, const double[::1] y, double C,
                Py_ssize_t max_epochs, double tol, uint64_t seed):
    """L1-loss linear SVM by dual coordinate descent (bias folded into X).

    Returns (w, alpha, dual_trace, gap, epochs, converged).
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, j, k, pos, tmp_i, epoch
    cdef double g, pg, a_old, a_new, margin, wsq, hinge, asum, primal, dual, gap = 0.0
    cdef uint64_t state = seed
    cdef bint converged = False
    w = np.zeros(d, dtype=np.float64)
    alpha = np.zeros(n, dtype=np.float64)
    qii = np.zeros(n, dtype=np.float64)
    trace = np.zeros(max_epochs, dtype=np.float64)
    cdef double[::1] w_v = w
    cdef double[::1] a_v = alpha
    cdef double[::1] q_v = qii
    cdef double[::1] tr_v = trace
    cdef Py_ssize_t* order = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    try:
        with nogil:
            for i in range(n):
                order[i] = i
                q_v[i] = 0.0
                for j in range(d):
                    q_v[i] += X[i, j] * X[i, j]
            epoch = 0
            while epoch < max_epochs:
                for k in range(n - 1, 0, -1):
                    pos = _randbelow(&state, k + 1)
                    tmp_i = order[k]
                    order[k] = order[pos]
                    order[pos] = tmp_i
                for k in range(n):
                    i = order[k]
                    if q_v[i] <= 0.0:
                        continue
                    margin = 0.0
                    for j in range(d):
                        margin += w_v[j] * X[i, j]
                    g = y[i] * margin - 1.0
                    pg = g
                    if a_v[i] <= 0.0:
                        pg = g if g < 0.0 else 0.0
                    elif a_v[i] >= C:
                        pg = g if g > 0.0 else 0.0
                    if pg != 0.0:
                        a_old = a_v[i]
                        a_new = a_old - g / q_v[i]
                        if a_new < 0.0:
                            a_new = 0.0
                        elif a_new > C:
                            a_new = C
                        a_v[i] = a_new
                        for j in range(d):
                            w_v[j] += (a_new - a_old) * y[i] * X[i, j]
                wsq = 0.0
                for j in range(d):
                    wsq += w_v[j] * w_v[j]
                hinge = 0.0
                asum = 0.0
                for i in range(n):
                    margin = 0.0
                    for j in range(d):
                        margin += w_v[j] * X[i, j]
                    margin = 1.0 - y[i] * margin
                    if margin > 0.0:
                        hinge += margin
                    asum += a_v[i]
                primal = 0.5 * wsq + C * hinge
                dual = asum - 0.5 * wsq
                tr_v[epoch] = dual
                gap = primal - dual
                epoch += 1
                if gap <= tol * primal:
                    converged = True
                    break
    finally:
        free(order)
    return w, alpha, trace[:epoch].copy(), gap, epoch, bool(converged)

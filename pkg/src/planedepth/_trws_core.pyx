# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython kernels for the hot inner loops: chain-based TRW-S sweeps, label
extraction, and boundary-pixel cost-table accumulation."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")


cdef inline void _row_min_into(double[:, :, ::1] ecosts, Py_ssize_t e,
                               double* t, double* out, Py_ssize_t L) noexcept nogil:
    # out[x] = min_y ecosts[e, x, y] + t[y]
    cdef Py_ssize_t x, y
    cdef double best, v
    for x in range(L):
        best = INF
        for y in range(L):
            v = ecosts[e, x, y] + t[y]
            if v < best:
                best = v
        out[x] = best


cdef inline void _col_min_into(double[:, :, ::1] ecosts, Py_ssize_t e,
                               double* s, double* out, Py_ssize_t L) noexcept nogil:
    # out[x] = min_y s[y] + ecosts[e, y, x]
    cdef Py_ssize_t x, y
    cdef double best, v
    for x in range(L):
        best = INF
        for y in range(L):
            v = s[y] + ecosts[e, y, x]
            if v < best:
                best = v
        out[x] = best


def run_sweeps(double[:, ::1] theta,
               long long[::1] chain_off,
               long long[::1] pos_node,
               long long[::1] chain_edge,
               long long[::1] node_pos_off,
               long long[::1] node_pos,
               double[:, :, ::1] ecosts,
               int sweeps):
    """In-place min-marginal-averaging sweeps; returns per-sweep bounds."""
    cdef Py_ssize_t P = theta.shape[0]
    cdef Py_ssize_t L = theta.shape[1]
    cdef Py_ssize_t C = chain_off.shape[0] - 1
    cdef Py_ssize_t S = node_pos_off.shape[0] - 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] F_arr = np.zeros((P, L))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] B_arr = np.zeros((P, L))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf_arr = np.zeros(3 * L)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bounds_arr = np.zeros(sweeps)
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] B = B_arr
    cdef double[::1] buf = buf_arr
    cdef double[::1] bounds = bounds_arr

    cdef cnp.ndarray[cnp.uint8_t, ndim=1] first_arr = np.zeros(P, dtype=np.uint8)
    cdef Py_ssize_t c
    for c in range(C):
        first_arr[chain_off[c]] = 1
    cdef cnp.uint8_t[::1] is_first = first_arr

    cdef Py_ssize_t max_r = 1
    cdef Py_ssize_t i
    for i in range(S):
        if node_pos_off[i + 1] - node_pos_off[i] > max_r:
            max_r = node_pos_off[i + 1] - node_pos_off[i]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] mus_arr = np.zeros((max_r, L))
    cdef double[:, ::1] mus = mus_arr

    cdef Py_ssize_t sweep, p, x, y, k, r, e
    cdef double best, v, m

    with nogil:
        for sweep in range(sweeps):
            # ---- forward pass ----
            for c in range(C):
                for x in range(L):
                    B[chain_off[c + 1] - 1, x] = 0.0
                for p in range(chain_off[c + 1] - 2, chain_off[c] - 1, -1):
                    for y in range(L):
                        buf[y] = theta[p + 1, y] + B[p + 1, y]
                    _row_min_into(ecosts, chain_edge[p], &buf[0], &B[p, 0], L)
            for i in range(S):
                r = node_pos_off[i + 1] - node_pos_off[i]
                for k in range(r):
                    p = node_pos[node_pos_off[i] + k]
                    if not is_first[p]:
                        for y in range(L):
                            buf[y] = F[p - 1, y] + theta[p - 1, y]
                        _col_min_into(ecosts, chain_edge[p - 1], &buf[0], &F[p, 0], L)
                    else:
                        for x in range(L):
                            F[p, x] = 0.0
                    for x in range(L):
                        mus[k, x] = F[p, x] + theta[p, x] + B[p, x]
                for x in range(L):
                    m = 0.0
                    for k in range(r):
                        m += mus[k, x]
                    buf[x] = m / r
                for k in range(r):
                    p = node_pos[node_pos_off[i] + k]
                    for x in range(L):
                        theta[p, x] += buf[x] - mus[k, x]

            # ---- backward pass ----
            for c in range(C):
                for x in range(L):
                    F[chain_off[c], x] = 0.0
                for p in range(chain_off[c] + 1, chain_off[c + 1]):
                    for y in range(L):
                        buf[y] = F[p - 1, y] + theta[p - 1, y]
                    _col_min_into(ecosts, chain_edge[p - 1], &buf[0], &F[p, 0], L)
            for i in range(S - 1, -1, -1):
                r = node_pos_off[i + 1] - node_pos_off[i]
                for k in range(r):
                    p = node_pos[node_pos_off[i] + k]
                    if chain_edge[p] >= 0:
                        for y in range(L):
                            buf[y] = theta[p + 1, y] + B[p + 1, y]
                        _row_min_into(ecosts, chain_edge[p], &buf[0], &B[p, 0], L)
                    else:
                        for x in range(L):
                            B[p, x] = 0.0
                    for x in range(L):
                        mus[k, x] = F[p, x] + theta[p, x] + B[p, x]
                for x in range(L):
                    m = 0.0
                    for k in range(r):
                        m += mus[k, x]
                    buf[x] = m / r
                for k in range(r):
                    p = node_pos[node_pos_off[i] + k]
                    for x in range(L):
                        theta[p, x] += buf[x] - mus[k, x]

            # ---- dual bound: exact chain minima ----
            m = 0.0
            for c in range(C):
                for x in range(L):
                    buf[x] = theta[chain_off[c], x]
                for p in range(chain_off[c] + 1, chain_off[c + 1]):
                    e = chain_edge[p - 1]
                    for x in range(L):
                        best = INF
                        for y in range(L):
                            v = buf[y] + ecosts[e, y, x]
                            if v < best:
                                best = v
                        buf[L + x] = theta[p, x] + best
                    for x in range(L):
                        buf[x] = buf[L + x]
                best = INF
                for x in range(L):
                    if buf[x] < best:
                        best = buf[x]
                m += best
            bounds[sweep] = m

    return bounds_arr


def extract_labels(double[:, ::1] theta,
                   long long[::1] chain_off,
                   long long[::1] chain_edge,
                   long long[::1] node_pos_off,
                   long long[::1] node_pos,
                   double[:, :, ::1] ecosts):
    """Sequential labeling from chain min-marginals, earlier nodes conditioned."""
    cdef Py_ssize_t P = theta.shape[0]
    cdef Py_ssize_t L = theta.shape[1]
    cdef Py_ssize_t C = chain_off.shape[0] - 1
    cdef Py_ssize_t S = node_pos_off.shape[0] - 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] B_arr = np.zeros((P, L))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cond_arr = np.zeros((P, L))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf_arr = np.zeros(2 * L)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels_arr = np.zeros(S, dtype=np.int64)
    cdef double[:, ::1] B = B_arr
    cdef double[:, ::1] cond = cond_arr
    cdef double[::1] buf = buf_arr
    cdef long long[::1] labels = labels_arr

    cdef Py_ssize_t c, i, k, p, x, y, e, xbest
    cdef double best

    with nogil:
        for c in range(C):
            for p in range(chain_off[c + 1] - 2, chain_off[c] - 1, -1):
                for y in range(L):
                    buf[y] = theta[p + 1, y] + B[p + 1, y]
                _row_min_into(ecosts, chain_edge[p], &buf[0], &B[p, 0], L)
        for i in range(S):
            for x in range(L):
                buf[x] = 0.0
            for k in range(node_pos_off[i], node_pos_off[i + 1]):
                p = node_pos[k]
                for x in range(L):
                    buf[x] += (cond[p, x] + theta[p, x]) + B[p, x]
            xbest = 0
            best = buf[0]
            for x in range(1, L):
                if buf[x] < best:
                    best = buf[x]
                    xbest = x
            labels[i] = xbest
            for k in range(node_pos_off[i], node_pos_off[i + 1]):
                p = node_pos[k]
                e = chain_edge[p]
                if e >= 0:
                    for y in range(L):
                        cond[p + 1, y] = ecosts[e, xbest, y]

    return labels_arr


def edge_table_sums(double[:, ::1] di, double[:, ::1] dj,
                    cnp.uint8_t[:, ::1] bad_i, cnp.uint8_t[:, ::1] bad_j,
                    long long[::1] off, double tau):
    """Per-edge sums of truncated depth disagreement over boundary pixels.

    di, dj  (B, P) plane depths at edge-sorted boundary pixels for the two
            sides; bad_* flag degenerate rays (max penalty tau).
    off     (E+1,) CSR pixel ranges per edge.
    Returns (E, P, P) tables.
    """
    cdef Py_ssize_t E = off.shape[0] - 1
    cdef Py_ssize_t P = di.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.zeros((E, P, P))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, x, p, q
    cdef double a, v
    cdef cnp.uint8_t bp

    with nogil:
        for e in range(E):
            for x in range(off[e], off[e + 1]):
                for p in range(P):
                    a = di[x, p]
                    bp = bad_i[x, p]
                    for q in range(P):
                        if bp or bad_j[x, q]:
                            v = tau
                        else:
                            v = a - dj[x, q]
                            if v < 0:
                                v = -v
                            if v > tau:
                                v = tau
                        out[e, p, q] += v
    return out_arr


def cardboard_edge_table_sums(double[:, ::1] offsets,
                              cnp.uint8_t[:, ::1] road_mask,
                              long long[::1] b_i, long long[::1] b_j,
                              double[::1] g_obj, double[::1] g_road,
                              cnp.uint8_t[::1] bad_obj, cnp.uint8_t[::1] bad_road,
                              long long[::1] off, double tau):
    """Edge tables for the cardboard model, where depth = offset * gain.

    offsets    (S, P) plane offsets; road_mask flags road-normal particles
    b_i, b_j   (B,) edge-sorted boundary pixels' side nodes
    g_*        (B,) per-pixel depth gain for each normal family
    bad_*      (B,) degenerate-ray flags per family
    off        (E+1,) CSR pixel ranges per edge
    Returns (E, P, P) tables of truncated depth disagreement sums.
    """
    cdef Py_ssize_t E = off.shape[0] - 1
    cdef Py_ssize_t P = offsets.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.zeros((E, P, P))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, x, p, q, i, j
    cdef double a, v, go, gr
    cdef cnp.uint8_t bo, br, bp

    with nogil:
        for e in range(E):
            for x in range(off[e], off[e + 1]):
                i = b_i[x]
                j = b_j[x]
                go = g_obj[x]
                gr = g_road[x]
                bo = bad_obj[x]
                br = bad_road[x]
                for p in range(P):
                    if road_mask[i, p]:
                        a = offsets[i, p] * gr
                        bp = br
                    else:
                        a = offsets[i, p] * go
                        bp = bo
                    for q in range(P):
                        if bp or (br if road_mask[j, q] else bo):
                            v = tau
                        else:
                            v = a - (offsets[j, q] * (gr if road_mask[j, q] else go))
                            if v < 0:
                                v = -v
                            if v > tau:
                                v = tau
                        out[e, p, q] += v
    return out_arr

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled transportation simplex.

Pivot-for-pivot mirror of ``fallback.solve_transport`` (same northwest-corner
start, same entering rule and tie-breaks), with the spanning tree kept in
doubly linked per-node arc lists so every pivot is O(m + k) outside the
reduced-cost scan.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPL = "cython"

DEF DEGEN_EPS = 1e-15


class SimplexStall(RuntimeError):
    """Iteration cap hit before reaching an optimal basis."""


def solve_transport(cost, a, b, long max_iter=0, double eps=0.0):
    """Exact optimum of min <cost, plan>; see fallback.solve_transport."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] C = \
        np.ascontiguousarray(cost, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = np.asarray(a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bv = np.asarray(b, dtype=np.float64)
    cdef long m = C.shape[0]
    cdef long k = C.shape[1]
    cdef long nb = m + k - 1
    cdef long nn = m + k

    if eps <= 0.0:
        eps = 1e-11 * (1.0 + float(np.abs(C).max(initial=0.0)))
    if max_iter <= 0:
        max_iter = 400 * nn + 10000

    cdef cnp.ndarray[cnp.int64_t, ndim=1] bi = np.empty(nb, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bj = np.empty(nb, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fl = np.empty(nb, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ar = av.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] br = bv.copy()

    # --- northwest corner ---
    cdef long i = 0, j = 0, t, s_
    cdef double s
    for t in range(nb):
        s = ar[i] if ar[i] < br[j] else br[j]
        bi[t] = i
        bj[t] = j
        fl[t] = s
        ar[i] -= s
        br[j] -= s
        if ar[i] <= br[j] and i < m - 1:
            i += 1
        elif j < k - 1:
            j += 1
        else:
            i += 1

    # --- doubly linked adjacency, one list per row node and per col node ---
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rhead = np.full(m, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] chead = np.full(k, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rnext = np.full(nb, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rprev = np.full(nb, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnext = np.full(nb, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cprev = np.full(nb, -1, dtype=np.int64)

    for t in range(nb):
        i = bi[t]
        rnext[t] = rhead[i]
        if rhead[i] >= 0:
            rprev[rhead[i]] = t
        rprev[t] = -1
        rhead[i] = t
        j = bj[t]
        cnext[t] = chead[j]
        if chead[j] >= 0:
            cprev[chead[j]] = t
        cprev[t] = -1
        chead[j] = t

    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent = np.empty(nn, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.empty(nn, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path = np.empty(nn, dtype=np.int64)

    cdef long degen_run = 0
    cdef bint bland = False
    cdef long pivot, head, tail, node, other, ei, ej, target
    cdef long idx, npath, leave, leave_key, key
    cdef double best, rcv, theta
    cdef bint done = False

    for pivot in range(max_iter):
        # duals via BFS from row node 0
        for t in range(nn):
            parent[t] = -1
        order[0] = 0
        parent[0] = -2
        u[0] = 0.0
        head = 0
        tail = 1
        while head < tail:
            node = order[head]
            head += 1
            if node < m:
                t = rhead[node]
                while t >= 0:
                    other = m + bj[t]
                    if parent[other] == -1:
                        parent[other] = t
                        order[tail] = other
                        tail += 1
                        v[other - m] = C[node, other - m] - u[node]
                    t = rnext[t]
            else:
                t = chead[node - m]
                while t >= 0:
                    other = bi[t]
                    if parent[other] == -1:
                        parent[other] = t
                        order[tail] = other
                        tail += 1
                        u[other] = C[other, node - m] - v[node - m]
                    t = cnext[t]

        # entering arc
        idx = -1
        if bland:
            for i in range(m):
                for j in range(k):
                    if C[i, j] - u[i] - v[j] < -eps:
                        idx = i * k + j
                        break
                if idx >= 0:
                    break
            if idx < 0:
                done = True
                break
        else:
            best = -eps
            for i in range(m):
                for j in range(k):
                    rcv = C[i, j] - u[i] - v[j]
                    if rcv < best:
                        best = rcv
                        idx = i * k + j
            if idx < 0:
                done = True
                break
        ei = idx // k
        ej = idx % k

        # cycle: tree path from row node ei to col node m+ej
        for t in range(nn):
            parent[t] = -1
        parent[ei] = -2
        order[0] = ei
        head = 0
        tail = 1
        target = m + ej
        while head < tail and parent[target] == -1:
            node = order[head]
            head += 1
            if node < m:
                t = rhead[node]
                while t >= 0:
                    other = m + bj[t]
                    if parent[other] == -1:
                        parent[other] = t
                        order[tail] = other
                        tail += 1
                    t = rnext[t]
            else:
                t = chead[node - m]
                while t >= 0:
                    other = bi[t]
                    if parent[other] == -1:
                        parent[other] = t
                        order[tail] = other
                        tail += 1
                    t = cnext[t]
        npath = 0
        node = target
        while node != ei:
            t = parent[node]
            path[npath] = t
            npath += 1
            if node >= m:
                node = bi[t]
            else:
                node = m + bj[t]
        # path[] holds arcs from the m+ej end; reverse in place
        for s_ in range(npath // 2):
            t = path[s_]
            path[s_] = path[npath - 1 - s_]
            path[npath - 1 - s_] = t

        # ratio test on minus arcs (even positions), lowest (i,j) tie-break
        theta = -1.0
        for s_ in range(0, npath, 2):
            t = path[s_]
            if theta < 0.0 or fl[t] < theta:
                theta = fl[t]
        leave = -1
        leave_key = m * k
        for s_ in range(0, npath, 2):
            t = path[s_]
            key = bi[t] * k + bj[t]
            if fl[t] <= theta and key < leave_key:
                leave = t
                leave_key = key
        for s_ in range(0, npath, 2):
            fl[path[s_]] -= theta
        for s_ in range(1, npath, 2):
            fl[path[s_]] += theta

        if theta <= DEGEN_EPS:
            degen_run += 1
            if degen_run > 2 * nn:
                bland = True
        else:
            degen_run = 0
            bland = False

        # basis exchange: unlink leaving arc, relink slot as the entering arc
        t = leave
        if rprev[t] >= 0:
            rnext[rprev[t]] = rnext[t]
        else:
            rhead[bi[t]] = rnext[t]
        if rnext[t] >= 0:
            rprev[rnext[t]] = rprev[t]
        if cprev[t] >= 0:
            cnext[cprev[t]] = cnext[t]
        else:
            chead[bj[t]] = cnext[t]
        if cnext[t] >= 0:
            cprev[cnext[t]] = cprev[t]

        bi[t] = ei
        bj[t] = ej
        fl[t] = theta
        rnext[t] = rhead[ei]
        if rhead[ei] >= 0:
            rprev[rhead[ei]] = t
        rprev[t] = -1
        rhead[ei] = t
        cnext[t] = chead[ej]
        if chead[ej] >= 0:
            cprev[chead[ej]] = t
        cprev[t] = -1
        chead[ej] = t

    if not done:
        raise SimplexStall(f"no optimal basis after {max_iter} pivots")

    plan = np.zeros((m, k))
    flc = np.maximum(np.asarray(fl), 0.0)
    plan[np.asarray(bi), np.asarray(bj)] = flc
    return plan, np.asarray(u), np.asarray(v), pivot

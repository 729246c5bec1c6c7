"""Pure-numpy transportation simplex.

Reference implementation of the exact network-flow solver; the Cython
extension in ``_simplex.pyx`` mirrors this pivot-for-pivot (same entering
rule, same tie-breaks), so both backends return identical bases.
"""

import numpy as np

IMPL = "fallback"

_DEGEN_EPS = 1e-15


class SimplexStall(RuntimeError):
    """Iteration cap hit before reaching an optimal basis."""


def _northwest_corner(a, b):
    """Initial basic feasible solution; returns (rows, cols, flows)."""
    m, k = len(a), len(b)
    ar = a.astype(float).copy()
    br = b.astype(float).copy()
    bi = np.empty(m + k - 1, dtype=np.int64)
    bj = np.empty(m + k - 1, dtype=np.int64)
    fl = np.empty(m + k - 1, dtype=float)
    i = j = 0
    for t in range(m + k - 1):
        s = min(ar[i], br[j])
        bi[t], bj[t], fl[t] = i, j, s
        ar[i] -= s
        br[j] -= s
        if ar[i] <= br[j] and i < m - 1:
            i += 1
        elif j < k - 1:
            j += 1
        else:
            i += 1
    return bi, bj, fl


def solve_transport(cost, a, b, max_iter=0, eps=0.0):
    """Exact optimum of min <cost, plan> s.t. plan rows sum to a, cols to b.

    All entries of a and b must be strictly positive (callers restrict to
    the support). Returns (plan, u, v, n_pivots) where (u, v) are the tree
    duals of the final basis: u[i] + v[j] == cost[i, j] on basic cells and
    <= cost elsewhere.
    """
    C = np.ascontiguousarray(cost, dtype=float)
    m, k = C.shape
    if eps <= 0.0:
        eps = 1e-11 * (1.0 + float(np.abs(C).max(initial=0.0)))
    if max_iter <= 0:
        max_iter = 400 * (m + k) + 10000

    bi, bj, fl = _northwest_corner(np.asarray(a, float), np.asarray(b, float))
    nb = m + k - 1
    # node ids: rows 0..m-1, cols m..m+k-1; adjacency holds basic-arc slots
    adj = [[] for _ in range(m + k)]
    for t in range(nb):
        adj[bi[t]].append(t)
        adj[m + bj[t]].append(t)

    u = np.zeros(m)
    v = np.zeros(k)
    parent = np.empty(m + k, dtype=np.int64)
    order = np.empty(m + k, dtype=np.int64)
    degen_run = 0
    bland = False

    for pivot in range(max_iter):
        # --- duals from the spanning tree (BFS rooted at row node 0) ---
        parent[:] = -1
        order[0] = 0
        parent[0] = -2
        u[0] = 0.0
        head, tail = 0, 1
        while head < tail:
            node = order[head]
            head += 1
            for t in adj[node]:
                other = m + bj[t] if bi[t] == node else bi[t]
                if parent[other] == -1:
                    parent[other] = t
                    order[tail] = other
                    tail += 1
                    if other >= m:
                        v[other - m] = C[bi[t], other - m] - u[bi[t]]
                    else:
                        u[other] = C[other, bj[t]] - v[bj[t]]

        # --- entering arc ---
        rc = C - u[:, None] - v[None, :]
        if bland:
            flat = rc.ravel()
            neg = flat < -eps
            if not neg.any():
                break
            idx = int(np.argmax(neg))
        else:
            idx = int(rc.argmin())
            if rc.flat[idx] >= -eps:
                break
        ei, ej = divmod(idx, k)

        # --- cycle: tree path from row node ei to col node m+ej ---
        parent[:] = -1
        parent[ei] = -2
        order[0] = ei
        head, tail = 0, 1
        target = m + ej
        while head < tail and parent[target] == -1:
            node = order[head]
            head += 1
            for t in adj[node]:
                other = m + bj[t] if bi[t] == node else bi[t]
                if parent[other] == -1:
                    parent[other] = t
                    order[tail] = other
                    tail += 1
        path = []
        node = target
        while node != ei:
            t = parent[node]
            path.append(t)
            node = bi[t] if node >= m else m + bj[t]
        path.reverse()
        minus = path[0::2]

        # --- ratio test: leaving arc = min flow on minus arcs, lowest (i,j) ---
        theta = np.inf
        for t in minus:
            if fl[t] < theta:
                theta = fl[t]
        leave = -1
        leave_key = m * k
        for t in minus:
            key = bi[t] * k + bj[t]
            if fl[t] <= theta and key < leave_key:
                leave = t
                leave_key = key
        for t in minus:
            fl[t] -= theta
        for t in path[1::2]:
            fl[t] += theta

        # anti-cycling: fall back to Bland's rule after a degenerate streak
        if theta <= _DEGEN_EPS:
            degen_run += 1
            if degen_run > 2 * (m + k):
                bland = True
        else:
            degen_run = 0
            bland = False

        # --- basis exchange: slot of leaving arc takes the entering arc ---
        adj[bi[leave]].remove(leave)
        adj[m + bj[leave]].remove(leave)
        bi[leave], bj[leave], fl[leave] = ei, ej, theta
        adj[ei].append(leave)
        adj[m + ej].append(leave)
    else:
        raise SimplexStall(f"no optimal basis after {max_iter} pivots")

    plan = np.zeros((m, k))
    plan[bi, bj] = np.maximum(fl, 0.0)
    return plan, u, v, pivot

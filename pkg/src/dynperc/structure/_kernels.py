"""Compiled graph kernels: bridge DFS with removal counts, 2-core peeling,
exhaustive isoperimetric minimisation."""

import numpy as np

from .._jit import njit


@njit
def removal_counts_kernel(n, indptr, nbr, eid, active):
    """R(x) for every active vertex via one low-link DFS per component.

    Each component is rooted at its smallest label.  A tree edge (p, c) is a
    bridge iff ``low[c] > tin[p]``; the side without the root is the subtree
    of ``c``, so on equal halves the subtree side counts as the smaller one.
    """
    tin = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    sub = np.zeros(n, np.int64)
    par = np.full(n, -1, np.int64)
    pe = np.full(n, -1, np.int64)
    it = np.zeros(n, np.int64)
    order = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    diff = np.zeros(n + 1, np.int64)
    out = np.zeros(n, np.int64)
    timer = 0
    for s in range(n):
        if not active[s] or tin[s] >= 0:
            continue
        start = timer
        tin[s] = timer
        low[s] = timer
        order[timer] = s
        timer += 1
        sub[s] = 1
        it[s] = indptr[s]
        top = 1
        stack[0] = s
        while top > 0:
            u = stack[top - 1]
            if it[u] < indptr[u + 1]:
                j = it[u]
                it[u] += 1
                v = nbr[j]
                e = eid[j]
                if e == pe[u] or not active[v]:
                    continue
                if tin[v] < 0:
                    par[v] = u
                    pe[v] = e
                    tin[v] = timer
                    low[v] = timer
                    order[timer] = v
                    timer += 1
                    sub[v] = 1
                    it[v] = indptr[v]
                    stack[top] = v
                    top += 1
                elif tin[v] < low[u]:
                    low[u] = tin[v]
            else:
                top -= 1
                p = par[u]
                if p >= 0:
                    if low[u] < low[p]:
                        low[p] = low[u]
                    sub[p] += sub[u]
        size = timer - start
        for k in range(start + 1, timer):
            c = order[k]
            if low[c] > tin[par[c]]:
                a = tin[c]
                b = a + sub[c]
                if 2 * sub[c] <= size:
                    diff[a] += 1
                    diff[b] -= 1
                else:
                    diff[start] += 1
                    diff[start + size] -= 1
                    diff[a] -= 1
                    diff[b] += 1
    acc = 0
    for k in range(timer):
        acc += diff[k]
        out[order[k]] = acc
    return out


@njit
def core_mask_kernel(n, indptr, nbr, active):
    """Mask of the 2-core: repeatedly delete active vertices of degree < 2."""
    deg = np.zeros(n, np.int64)
    for u in range(n):
        if active[u]:
            for j in range(indptr[u], indptr[u + 1]):
                if active[nbr[j]]:
                    deg[u] += 1
    alive = active.copy()
    queue = np.empty(n, np.int64)
    head = 0
    tail = 0
    for u in range(n):
        if alive[u] and deg[u] < 2:
            alive[u] = False
            queue[tail] = u
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for j in range(indptr[u], indptr[u + 1]):
            v = nbr[j]
            if alive[v]:
                deg[v] -= 1
                if deg[v] < 2:
                    alive[v] = False
                    queue[tail] = v
                    tail += 1
    return alive


@njit
def exact_phi_kernel(w, deg, total_edges):
    """min |dS|/d(S) over nonempty S with d(S) <= |E|, by Gray-code sweep.

    ``w`` is the symmetric multiplicity matrix with zero diagonal (loops only
    enter through ``deg``).  Returns (phi, best_mask).
    """
    k = w.shape[0]
    nl = np.zeros(k, np.int64)
    for v in range(k):
        for u in range(k):
            nl[v] += w[v, u]
    ins = np.zeros(k, np.int64)   # sum of multiplicities from v into S
    member = np.zeros(k, np.bool_)
    d_s = 0
    bd = 0
    mask = 0
    best = np.inf
    best_mask = 0
    for i in range(1, 1 << k):
        v = 0
        x = i
        while (x & 1) == 0:
            x >>= 1
            v += 1
        if member[v]:
            member[v] = False
            d_s -= deg[v]
            bd -= nl[v] - 2 * ins[v]
            mask ^= 1 << v
            for u in range(k):
                ins[u] -= w[v, u]
        else:
            member[v] = True
            d_s += deg[v]
            bd += nl[v] - 2 * ins[v]
            mask ^= 1 << v
            for u in range(k):
                ins[u] += w[v, u]
        if d_s > 0 and d_s <= total_edges:
            r = bd / d_s
            if r < best:
                best = r
                best_mask = mask
    return best, best_mask

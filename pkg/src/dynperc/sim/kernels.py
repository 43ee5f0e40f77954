"""Event-driven kernels for the environment and its walkers.

The environment is a dense symmetric ``uint8`` adjacency matrix with a degree
vector and two counters (open edges, isolated vertices).  Events follow the
merged Poisson race: one exponential clock of rate ``mu*N + w``; a single
uniform then selects either a uniformly random edge to refresh or a uniformly
random walker to ring, and its fractional part supplies the index.
"""

import numpy as np

from .._jit import njit

# stop codes
STOP_NONE = 0
STOP_WALKER_ISOLATED = 1
STOP_BOTH_ISOLATED = 2
STOP_WALKER_IN_GIANT = 3
STOP_WALKER_OUT_OF_GIANT = 4
STOP_ENV_EQUALS = 5
STOP_EVERY_EVENT = 6

# return statuses
REACHED_END = 0
PREDICATE_MET = 1
LOG_FULL = 2

KIND_REFRESH = 0
KIND_RING = 1


@njit
def label_components(adj, deg, labels, sizes, stack):
    """Label components of a dense adjacency; return (count, giant label).

    Labels are assigned in order of each component's smallest vertex, so the
    smallest label among the largest components holds the smallest vertex.
    """
    n = adj.shape[0]
    for v in range(n):
        labels[v] = -1
    ncomp = 0
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = ncomp
        size = 1
        top = 0
        stack[top] = s
        top += 1
        while top > 0:
            top -= 1
            u = stack[top]
            if deg[u] == 0:
                continue
            row = adj[u]
            for v in range(n):
                if row[v] and labels[v] < 0:
                    labels[v] = ncomp
                    size += 1
                    stack[top] = v
                    top += 1
        sizes[ncomp] = size
        ncomp += 1
    best = 0
    for c in range(1, ncomp):
        if sizes[c] > sizes[best]:
            best = c
    return ncomp, best


@njit
def _in_giant(adj, deg, v, labels, sizes, stack):
    _, g = label_components(adj, deg, labels, sizes, stack)
    return labels[v] == g


@njit
def _predicate(code, adj, deg, pos, a, b, env_diff, labels, sizes, stack):
    if code == STOP_WALKER_ISOLATED:
        return deg[pos[a]] == 0
    if code == STOP_BOTH_ISOLATED:
        return deg[pos[a]] == 0 and deg[pos[b]] == 0
    if code == STOP_WALKER_IN_GIANT:
        return _in_giant(adj, deg, pos[a], labels, sizes, stack)
    if code == STOP_WALKER_OUT_OF_GIANT:
        return not _in_giant(adj, deg, pos[a], labels, sizes, stack)
    if code == STOP_ENV_EQUALS:
        return env_diff[0] == 0
    if code == STOP_EVERY_EVENT:
        return True
    return False


@njit
def advance_kernel(adj, deg, counts, pos, clock, t_end, mu, p, rng,
                   stop_code, stop_a, stop_b, target, env_diff,
                   log_t, log_k, log_a, log_b, log_c, log_on, n_events):
    """Advance to ``t_end`` or until the stop predicate holds.

    ``counts`` = [open edges, isolated vertices]; ``n_events`` accumulates
    [refresh events, ring events].  ``target``/``env_diff`` hold the reference
    matrix and the running mismatch count for ``STOP_ENV_EQUALS``.
    Returns ``(clock, n_logged, status)``.  The predicate is tested before the
    first event and after every event; giant predicates are recomputed only
    after an edge changes state, since walker moves never change components.
    """
    n = adj.shape[0]
    w = pos.shape[0]
    npairs = n * (n - 1)
    refresh_rate = mu * (npairs // 2)
    total = refresh_rate + w
    labels = np.empty(n, np.int64)
    sizes = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    giant_codes = stop_code == STOP_WALKER_IN_GIANT or stop_code == STOP_WALKER_OUT_OF_GIANT
    nlog = 0
    cap = log_t.shape[0]

    if stop_code != STOP_NONE and stop_code != STOP_EVERY_EVENT:
        if _predicate(stop_code, adj, deg, pos, stop_a, stop_b, env_diff, labels, sizes, stack):
            return clock, nlog, PREDICATE_MET
    if total <= 0.0:
        return t_end, nlog, REACHED_END

    while True:
        dt = rng.exponential(1.0 / total)
        if clock + dt > t_end:
            return t_end, nlog, REACHED_END
        clock += dt
        u = rng.random() * total
        changed = False
        if u < refresh_rate:
            k = int(u / refresh_rate * npairs)
            if k >= npairs:
                k = npairs - 1
            x = k // (n - 1)
            y = k % (n - 1)
            if y >= x:
                y += 1
            new = 1 if rng.random() < p else 0
            old = adj[x, y]
            if new != old:
                changed = True
                adj[x, y] = new
                adj[y, x] = new
                if new == 1:
                    counts[0] += 1
                    if deg[x] == 0:
                        counts[1] -= 1
                    if deg[y] == 0:
                        counts[1] -= 1
                    deg[x] += 1
                    deg[y] += 1
                else:
                    counts[0] -= 1
                    deg[x] -= 1
                    deg[y] -= 1
                    if deg[x] == 0:
                        counts[1] += 1
                    if deg[y] == 0:
                        counts[1] += 1
                if stop_code == STOP_ENV_EQUALS:
                    t_xy = target[x, y]
                    if old == t_xy:
                        env_diff[0] += 1
                    elif new == t_xy:
                        env_diff[0] -= 1
            n_events[0] += 1
            if log_on:
                if x < y:
                    log_a[nlog] = x
                    log_b[nlog] = y
                else:
                    log_a[nlog] = y
                    log_b[nlog] = x
                log_t[nlog] = clock
                log_k[nlog] = KIND_REFRESH
                log_c[nlog] = new
                nlog += 1
        else:
            s = (u - refresh_rate)
            i = int(s)
            if i >= w:
                i = w - 1
            v = int((s - i) * (n - 1))
            if v >= n - 1:
                v = n - 2
            cur = pos[i]
            if v >= cur:
                v += 1
            moved = 0
            if adj[cur, v]:
                pos[i] = v
                moved = 1
            n_events[1] += 1
            if log_on:
                log_t[nlog] = clock
                log_k[nlog] = KIND_RING
                log_a[nlog] = i
                log_b[nlog] = v
                log_c[nlog] = moved
                nlog += 1
        if stop_code != STOP_NONE:
            if stop_code == STOP_EVERY_EVENT:
                return clock, nlog, PREDICATE_MET
            if changed or not giant_codes:
                if _predicate(stop_code, adj, deg, pos, stop_a, stop_b, env_diff,
                              labels, sizes, stack):
                    return clock, nlog, PREDICATE_MET
        if log_on and nlog == cap:
            return clock, nlog, LOG_FULL


@njit
def replay_kernel(adj, deg, counts, pos, log_k, log_a, log_b, log_c):
    """Apply a logged event sequence; returns the number of inconsistencies."""
    bad = 0
    for e in range(log_k.shape[0]):
        if log_k[e] == KIND_REFRESH:
            x = log_a[e]
            y = log_b[e]
            new = log_c[e]
            old = adj[x, y]
            if new != old:
                adj[x, y] = new
                adj[y, x] = new
                if new == 1:
                    counts[0] += 1
                    if deg[x] == 0:
                        counts[1] -= 1
                    if deg[y] == 0:
                        counts[1] -= 1
                    deg[x] += 1
                    deg[y] += 1
                else:
                    counts[0] -= 1
                    deg[x] -= 1
                    deg[y] -= 1
                    if deg[x] == 0:
                        counts[1] += 1
                    if deg[y] == 0:
                        counts[1] += 1
        else:
            i = log_a[e]
            v = log_b[e]
            should_move = adj[pos[i], v] == 1
            if should_move != (log_c[e] == 1):
                bad += 1
            if should_move:
                pos[i] = v
    return bad

"""Couplings of full systems.

``run_full_coupling`` is the four-step coalescent coupling: shared refreshes
with independent walks until the environments agree and both walkers sit on
isolated vertices; a joint change-clock on the closed edges at the two walkers;
then paired refresh clocks on the two mismatched edges with the walkers moving
in lockstep through the new vertex ``z``.

Two systems are declared coalesced the first time their full states coincide
(walker position and environment); from then on they share every event.  A
failed attempt is resumed from the shared-refresh stage, which only hands over
to the change-clock stage once the environments agree again.

``run_static_dynamic`` runs a walk on a frozen snapshot and a walk on the
evolving environment with shared ring clocks and targets.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .params import Params
from .seeding import replica_rng
from .sim.environment import Environment
from .sim.system import Censored

FAILURES = ("opened_x'y'", "z_not_isolated", "wrong_edge_pattern", "premature_change",
            "walkers_not_at_z")
R_OPENED, R_ZNOTISO, R_WRONG, R_PREMATURE, R_NOTATZ, R_SUCCESS, R_CENSORED = range(7)

PH_SHARED, PH_CHANGE, PH_PAIRED, PH_DONE = range(4)
ATT_COLS = 6        # t_start, t_equal, t_change, t_paired, t_end, outcome


# --- H_c ----------------------------------------------------------------------------
def _diff_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    i, j = np.nonzero(np.triu(a != b, 1))
    return np.stack([i, j], axis=1)


def h_close(eta, xi) -> bool:
    """True iff the environments differ at most on {(x,z), (y,z)} for some
    distinct x, y, z."""
    a = eta.adj if isinstance(eta, Environment) else np.asarray(eta)
    b = xi.adj if isinstance(xi, Environment) else np.asarray(xi)
    if a.shape != b.shape:
        raise ValueError("environments on different vertex counts")
    return _h_close_dense(a, b)


@njit
def _h_close_dense(a, b):
    n = a.shape[0]
    cnt = 0
    e = np.zeros((2, 2), np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] != b[i, j]:
                if cnt == 2:
                    return False
                e[cnt, 0] = i
                e[cnt, 1] = j
                cnt += 1
    if cnt < 2:
        return cnt == 0 or n >= 3
    # two differing pairs must share exactly one endpoint
    shared = 0
    for s in range(2):
        for t in range(2):
            if e[0, s] == e[1, t]:
                shared += 1
    return shared == 1


# --- helpers for the kernels ----------------------------------------------------------
@njit
def _set_edge(adj, deg, x, y, new):
    if adj[x, y] == new:
        return False
    adj[x, y] = new
    adj[y, x] = new
    if new:
        deg[x] += 1
        deg[y] += 1
    else:
        deg[x] -= 1
        deg[y] -= 1
    return True


@njit
def _mask(adj):
    n = adj.shape[0]
    if n > 8:
        return -1
    m = 0
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j]:
                m |= 1 << k
            k += 1
    return m


@njit
def _pair_from_uniform(frac, n):
    npairs = n * (n - 1)
    k = int(frac * npairs)
    if k >= npairs:
        k = npairs - 1
    x = k // (n - 1)
    y = k % (n - 1)
    if y >= x:
        y += 1
    return x, y


@njit
def _target(frac, n, cur):
    v = int(frac * (n - 1))
    if v >= n - 1:
        v = n - 2
    if v >= cur:
        v += 1
    return v


@njit
def _close_attempt(att, natt, clock, outcome):
    if natt < att.shape[0]:
        att[natt, 4] = clock
        att[natt, 5] = outcome
    natt += 1
    if natt < att.shape[0]:
        for c in range(ATT_COLS):
            att[natt, c] = np.nan
        att[natt, 0] = clock
    return natt


@njit
def full_coupling_kernel(adjA, degA, adjB, degB, pos, clock, t_cap, mu, p, rng, aux,
                         sample_t, rec, att, fails, hviol):
    """Run the coupled pair until ``t_cap`` (or until coalescence once all
    sample times are recorded).

    ``rec[k] = (X, Y, maskA, maskB)`` at ``sample_t[k]``; ``att`` collects one
    row per attempt; ``fails`` counts failure reasons; ``hviol[0]`` counts
    failure points where the pair is not H_c-close.
    Returns ``(tau_c or -1, clock, attempts)``.
    """
    n = adjA.shape[0]
    N = n * (n - 1) // 2
    ref = mu * N
    ns = sample_t.shape[0]
    si = 0
    diff = 0
    for i in range(n):
        for j in range(i + 1, n):
            if adjA[i, j] != adjB[i, j]:
                diff += 1
    tau = -1.0
    natt = 0
    for c in range(ATT_COLS):
        att[0, c] = np.nan
    att[0, 0] = clock
    phase = PH_SHARED
    xp = -1
    yp = -1
    z = -1
    check = True
    while True:
        if phase == PH_SHARED and check:
            if diff == 0:
                if natt < att.shape[0] and np.isnan(att[natt, 1]):
                    att[natt, 1] = clock
                if pos[0] == pos[1]:
                    tau = clock
                    phase = PH_DONE
                    natt = _close_attempt(att, natt, clock, R_SUCCESS)
                elif degA[pos[0]] == 0 and degA[pos[1]] == 0:
                    phase = PH_CHANGE
                    xp = pos[0]
                    yp = pos[1]
                    if natt < att.shape[0]:
                        att[natt, 2] = clock
        check = False
        if phase == PH_DONE and si >= ns:
            return tau, clock, natt
        if phase == PH_SHARED:
            total = ref + 2.0
        elif phase == PH_CHANGE:
            r_ref = mu * (N - (2 * n - 3))
            r_chg = (2 * n - 3) * p * mu
            total = r_ref + r_chg
        else:
            total = ref + 1.0
        if total > 0.0:
            tn = clock + rng.exponential(1.0 / total)
        else:
            tn = np.inf
        while si < ns and sample_t[si] < tn and sample_t[si] <= t_cap:
            rec[si, 0] = pos[0]
            rec[si, 1] = pos[1]
            rec[si, 2] = _mask(adjA)
            rec[si, 3] = _mask(adjB)
            si += 1
        if tn > t_cap:
            if phase != PH_DONE:
                natt = _close_attempt(att, natt, t_cap, R_CENSORED)
            return tau, t_cap, natt
        clock = tn
        u = rng.random() * total

        if phase == PH_SHARED:
            if u < ref:
                x, y = _pair_from_uniform(u / ref, n)
                b = 1 if rng.random() < p else 0
                if adjA[x, y] != adjB[x, y]:
                    diff -= 1
                _set_edge(adjA, degA, x, y, b)
                _set_edge(adjB, degB, x, y, b)
            else:
                s = u - ref
                w = 0 if s < 1.0 else 1
                fr = s - w
                if fr >= 1.0:
                    fr = 0.999999999999
                if w == 0:
                    v = _target(fr, n, pos[0])
                    if adjA[pos[0], v]:
                        pos[0] = v
                else:
                    v = _target(fr, n, pos[1])
                    if adjB[pos[1], v]:
                        pos[1] = v
            check = True

        elif phase == PH_CHANGE:
            if u < r_ref:
                # shared refresh of an edge away from x', y'
                while True:
                    x, y = _pair_from_uniform(rng.random(), n)
                    if x != xp and x != yp and y != xp and y != yp:
                        break
                b = 1 if rng.random() < p else 0
                _set_edge(adjA, degA, x, y, b)
                _set_edge(adjB, degB, x, y, b)
            else:
                if natt < att.shape[0]:
                    att[natt, 3] = clock
                if aux.random() * (2 * n - 3) < 1.0:
                    _set_edge(adjA, degA, xp, yp, 1)
                    _set_edge(adjB, degB, xp, yp, 1)
                    fails[R_OPENED] += 1
                    natt = _close_attempt(att, natt, clock, R_OPENED)
                    phase = PH_SHARED
                    check = True
                else:
                    zi = int(aux.random() * (n - 2))
                    if zi >= n - 2:
                        zi = n - 3
                    lo = xp if xp < yp else yp
                    hi = yp if xp < yp else xp
                    if zi >= lo:
                        zi += 1
                    if zi >= hi:
                        zi += 1
                    z = zi
                    z_iso = degA[z] == 0
                    forward = aux.random() < 0.5
                    if forward:
                        _set_edge(adjA, degA, xp, z, 1)
                        _set_edge(adjB, degB, yp, z, 1)
                    else:
                        _set_edge(adjA, degA, yp, z, 1)
                        _set_edge(adjB, degB, xp, z, 1)
                    diff = 2
                    if z_iso and forward:
                        phase = PH_PAIRED
                    else:
                        r = R_ZNOTISO if not z_iso else R_WRONG
                        fails[r] += 1
                        if not _h_close_dense(adjA, adjB):
                            hviol[0] += 1
                        natt = _close_attempt(att, natt, clock, r)
                        phase = PH_SHARED
                        check = True

        elif phase == PH_PAIRED:
            if u < ref:
                x, y = _pair_from_uniform(u / ref, n)
                b = 1 if rng.random() < p else 0
                # swap (x',z) <-> (y',z) for xi
                x2 = x
                y2 = y
                if (x == xp and y == z) or (x == z and y == xp):
                    x2 = yp
                    y2 = z
                elif (x == yp and y == z) or (x == z and y == yp):
                    x2 = xp
                    y2 = z
                ca = _set_edge(adjA, degA, x, y, b)
                cb = _set_edge(adjB, degB, x2, y2, b)
                incident = (x == xp or x == yp or x == z or y == xp or y == yp or y == z)
                if incident and (ca or cb):
                    open_pair = (x == xp and y == z) or (x == z and y == xp)
                    if open_pair and b == 0:
                        # the open pair closed together: environments agree again
                        diff = 0
                        if pos[0] == z and pos[1] == z:
                            tau = clock
                            phase = PH_DONE
                            natt = _close_attempt(att, natt, clock, R_SUCCESS)
                        else:
                            fails[R_NOTATZ] += 1
                            natt = _close_attempt(att, natt, clock, R_NOTATZ)
                            phase = PH_SHARED
                    else:
                        fails[R_PREMATURE] += 1
                        diff = 0
                        if adjA[xp, z] != adjB[xp, z]:
                            diff += 1
                        if adjA[yp, z] != adjB[yp, z]:
                            diff += 1
                        if not _h_close_dense(adjA, adjB):
                            hviol[0] += 1
                        natt = _close_attempt(att, natt, clock, R_PREMATURE)
                        phase = PH_SHARED
                    check = True
            else:
                fr = u - ref
                if fr >= 1.0:
                    fr = 0.999999999999
                v = _target(fr, n, pos[0])
                sv = v
                if v == xp:
                    sv = yp
                elif v == yp:
                    sv = xp
                if adjA[pos[0], v]:
                    pos[0] = v
                if adjB[pos[1], sv]:
                    pos[1] = sv

        else:  # coalesced: one system, mirrored
            if u < ref:
                x, y = _pair_from_uniform(u / ref, n)
                b = 1 if rng.random() < p else 0
                _set_edge(adjA, degA, x, y, b)
                _set_edge(adjB, degB, x, y, b)
            else:
                v = _target(u - ref, n, pos[0])
                if adjA[pos[0], v]:
                    pos[0] = v
                    pos[1] = v


@dataclass
class CouplingRecord:
    """Outcome of one coupled run.

    ``attempts`` has one row per attempt: start, first time the environments
    agree, start of the change-clock stage, start of the paired stage, end,
    and outcome code (index into ``FAILURES``, then success, censored).
    """

    tau_c: float | Censored
    attempts: np.ndarray
    failure_counts: dict
    h_close_violations: int
    samples: np.ndarray | None = field(default=None, repr=False)   # (X, Y, maskA, maskB) rows
    sample_times: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_attempts(self) -> int:
        return int(self.attempts.shape[0])

    @property
    def retries(self) -> int:
        return int(sum(self.failure_counts.values()))

    @property
    def coalesced(self) -> bool:
        return not isinstance(self.tau_c, Censored)

    def sigma(self) -> np.ndarray:
        """Per attempt (sigma_1, sigma_2, sigma_3): time to environment
        agreement, change-clock wait, paired-stage duration (NaN where the
        stage was not reached)."""
        a = self.attempts
        s1 = a[:, 1] - a[:, 0]
        s2 = a[:, 3] - a[:, 2]
        s3 = np.where(np.isnan(a[:, 3]), np.nan, a[:, 4] - a[:, 3])
        # an attempt that fails at the change-clock has no paired stage
        failed_iii = np.isin(a[:, 5], (R_OPENED, R_ZNOTISO, R_WRONG))
        s3 = np.where(failed_iii, 0.0, s3)
        return np.stack([s1, s2, s3], axis=1)

    CSV_HEADER = ["tau_c", "censored", "attempts", *FAILURES]

    def csv_row(self) -> list:
        tc = self.tau_c.t_cap if isinstance(self.tau_c, Censored) else self.tau_c
        return [repr(float(tc)), int(isinstance(self.tau_c, Censored)), self.retries,
                *[self.failure_counts[k] for k in FAILURES]]

    @classmethod
    def from_csv_row(cls, row) -> "CouplingRecord":
        tc = float(row[0])
        tau = Censored(tc) if int(row[1]) else tc
        counts = {k: int(v) for k, v in zip(FAILURES, row[3:])}
        return cls(tau, np.zeros((0, ATT_COLS)), counts, 0)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CouplingRecord.CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[CouplingRecord]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    return [CouplingRecord.from_csv_row(r) for r in rows[1:]]


def run_full_coupling(params: Params, sys_a, sys_b, t_cap: float, seed, replica: int = 0,
                      sample_times=None, max_attempts: int = 4096):
    """Couple ``sys_a = (x0, eta0)`` with ``sys_b = (y0, xi0)``.

    Edge and walker randomness come from the replica stream ``(seed, replica)``;
    the change-clock choices from its sub-stream ``(seed, replica, 1)``.
    Returns ``(CouplingRecord, (X, eta), (Y, xi))`` at the final clock.
    """
    x0, eta0 = sys_a
    y0, xi0 = sys_b
    if eta0.n != params.n or xi0.n != params.n:
        raise ValueError("environments do not match params.n")
    if params.n < 3:
        raise ValueError("coupling needs n >= 3")
    rng = replica_rng(seed, replica, 0)
    aux = replica_rng(seed, replica, 1)
    eta = eta0.copy()
    xi = xi0.copy()
    pos = np.array([x0, y0], np.int64)
    st = np.zeros(0) if sample_times is None else np.asarray(sample_times, np.float64)
    rec = np.full((st.size, 4), -1, np.int64)
    att = np.full((max_attempts, ATT_COLS), np.nan)
    fails = np.zeros(5, np.int64)
    hviol = np.zeros(1, np.int64)
    tau, clock, natt = full_coupling_kernel(
        eta.adj, eta.deg, xi.adj, xi.deg, pos, float(eta0.clock), float(t_cap),
        float(params.mu), float(params.p), rng, aux, st, rec, att, fails, hviol)
    # keep counters in sync for the returned environments
    for env in (eta, xi):
        env.counts[:] = [int(env.deg.sum()) // 2, int(np.count_nonzero(env.deg == 0))]
        env.clock = float(clock)
    tau_c = tau if tau >= 0 else Censored(float(t_cap))
    record = CouplingRecord(
        tau_c, att[:min(natt, max_attempts)].copy(),
        {k: int(fails[i]) for i, k in enumerate(FAILURES)}, int(hviol[0]),
        rec if st.size else None, st if st.size else None)
    return record, (int(pos[0]), eta), (int(pos[1]), xi)


def coalescence_tail_curve(params: Params, start_sampler, times, replicas: int, seed: int,
                           t_cap=None):
    """Empirical P(tau_c > t) per time, as ``Estimate`` objects.

    ``start_sampler(rng) -> ((x0, eta0), (y0, xi0))`` draws both starts from the
    replica's sub-stream ``(seed, r, 2)``.
    """
    from .estimators import Estimate

    times = np.asarray(times, float)
    if replicas <= 0:
        raise ValueError("need at least one replica")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    cap = float(times.max()) if t_cap is None else float(t_cap)
    taus = np.empty(replicas)
    for r in range(replicas):
        a, b = start_sampler(replica_rng(seed, r, 2))
        rec, _, _ = run_full_coupling(params, a, b, cap, seed, r)
        taus[r] = np.inf if isinstance(rec.tau_c, Censored) else rec.tau_c
    out = []
    for t in times:
        f = float(np.mean(taus > t))
        out.append(Estimate(f, math.sqrt(f * (1 - f) / replicas), replicas, seed,
                            float(np.mean(np.isinf(taus))), t=float(t)))
    return out


# --- static / dynamic ---------------------------------------------------------------
@njit
def static_dynamic_kernel(adj0, adj, deg, x0, clock, t_cap, mu, p, rng, traj_s, traj_d, track_after):
    """Shared-clock walks on the frozen ``adj0`` and on the evolving ``adj``.

    Before decoupling the two walks coincide, so rings are thinned to actual
    moves (rate deg/(n-1)); afterwards, if ``track_after``, both walks run on
    the full ring clock with shared targets.  Returns
    ``(decoupling time or -1, n_static, n_dynamic)``.
    """
    n = adj.shape[0]
    N = n * (n - 1) // 2
    ref = mu * N
    visited = np.zeros(n, np.bool_)
    dd = np.zeros(n, np.int64)        # incident edges differing from adj0
    xs = x0
    xd = x0
    visited[x0] = True
    ns = 0
    nd = 0
    cap = traj_s.shape[0]
    traj_s[0, 0] = clock
    traj_s[0, 1] = xs
    traj_d[0, 0] = clock
    traj_d[0, 1] = xd
    ns = 1
    nd = 1
    tdec = -1.0
    while True:
        if tdec < 0:
            move_rate = deg[xd] / (n - 1)
            total = ref + move_rate
        else:
            if not track_after:
                return tdec, ns, nd
            total = ref + 1.0
        if total <= 0.0:
            return tdec, ns, nd
        clock += rng.exponential(1.0 / total)
        if clock > t_cap:
            return tdec, ns, nd
        u = rng.random() * total
        if u < ref:
            x, y = _pair_from_uniform(u / ref, n)
            b = 1 if rng.random() < p else 0
            old = adj[x, y]
            if _set_edge(adj, deg, x, y, b):
                if old == adj0[x, y]:
                    dd[x] += 1
                    dd[y] += 1
                else:
                    dd[x] -= 1
                    dd[y] -= 1
                if tdec < 0 and b != adj0[x, y] and (visited[x] or visited[y]):
                    tdec = clock
        elif tdec < 0:
            # a move of the common walker to a uniform open neighbour
            k = int((u - ref) / move_rate * deg[xd])
            if k >= deg[xd]:
                k = deg[xd] - 1
            v = -1
            for w in range(n):
                if adj[xd, w]:
                    if k == 0:
                        v = w
                        break
                    k -= 1
            xd = v
            xs = v
            visited[v] = True
            if ns < cap:
                traj_s[ns, 0] = clock
                traj_s[ns, 1] = xs
                ns += 1
            if nd < cap:
                traj_d[nd, 0] = clock
                traj_d[nd, 1] = xd
                nd += 1
            if dd[v] > 0:
                tdec = clock
        else:
            v_s = _target(u - ref, n, xs)
            v_d = _target(u - ref, n, xd)
            if adj0[xs, v_s]:
                xs = v_s
                if ns < cap:
                    traj_s[ns, 0] = clock
                    traj_s[ns, 1] = xs
                    ns += 1
            if adj[xd, v_d]:
                xd = v_d
                if nd < cap:
                    traj_d[nd, 0] = clock
                    traj_d[nd, 1] = xd
                    nd += 1


@dataclass
class StaticDynamicResult:
    decoupling_time: float | Censored
    static_traj: np.ndarray      # rows (jump time, new position), first row the start
    dynamic_traj: np.ndarray


def run_static_dynamic(params: Params, env: Environment, x0: int, t_cap: float, rng,
                       track_after: bool = False, max_jumps: int = 1 << 16) -> StaticDynamicResult:
    """Static walk on ``env`` frozen at time 0 against the dynamic walk.

    Decoupling happens the first time an edge incident to a vertex already
    visited differs from its time-0 state.  Until then the walks coincide.
    """
    adj0 = env.adj.copy()
    dyn = env.copy()
    ts = np.zeros((max_jumps, 2))
    td = np.zeros((max_jumps, 2))
    tdec, ns, nd = static_dynamic_kernel(adj0, dyn.adj, dyn.deg, int(x0), float(env.clock),
                                         float(t_cap), float(params.mu), float(params.p), rng,
                                         ts, td, bool(track_after))
    dec = tdec if tdec >= 0 else Censored(float(t_cap))
    return StaticDynamicResult(dec, ts[:ns].copy(), td[:nd].copy())

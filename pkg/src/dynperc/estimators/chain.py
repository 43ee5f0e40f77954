"""Degree chain of a fixed vertex, isolation excursions, parity, visit counts,
and the mixing-time bounds for an invariant initial environment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .._jit import njit
from ..params import Params
from ..seeding import replica_rng
from ..sim.environment import init_environment
from .core import Estimate, proportion

# Upper-bound constant, calibrated once at n=500, lam=2, eps=0.1,
# mu=(2/3)/((1+lam) n), 4000 replicas, seed 2024: the walk TV first drops
# below eps at mu t ~ 1.13, i.e. C ~ 0.49.  Frozen with a twofold margin.
IIIE_C = 1.0


# --- degree chain ---------------------------------------------------------------------
@dataclass
class DegreeChainResult:
    stationary: np.ndarray          # P(d = k), k = 0..n-1
    expected_hit0: float            # from the stationary law
    hit0_from: np.ndarray           # E_k[T_0]
    rates: np.ndarray               # rows (k, q_plus(k), q_minus(k))


def degree_chain_analysis(params: Params) -> DegreeChainResult:
    """Birth-death chain of d_t(v): up-rate (n-1-k) p mu, down-rate k (1-p) mu."""
    n, p, mu = params.n, params.p, params.mu
    k = np.arange(n, dtype=float)
    up = (n - 1 - k) * p * mu
    down = k * (1 - p) * mu
    pi = binom.pmf(np.arange(n), n - 1, p)
    # m[k] = E[time to step from k down to k-1]
    m = np.zeros(n)
    if n > 1:
        m[n - 1] = 1.0 / down[n - 1] if down[n - 1] > 0 else math.inf
        for j in range(n - 2, 0, -1):
            m[j] = (1.0 + up[j] * m[j + 1]) / down[j] if down[j] > 0 else math.inf
    h = np.concatenate([[0.0], np.cumsum(m[1:])])
    with np.errstate(invalid="ignore"):
        e = float(np.sum(np.where(pi > 0, pi * h, 0.0)))
    return DegreeChainResult(pi, e, h, np.stack([k, up, down], axis=1))


@njit
def _star_kernel(n, p, mu, rng, t_end, stop_at_zero, out_t, out_d):
    m = n - 1
    state = np.zeros(m, np.uint8)
    for r in range(out_t.shape[0]):
        d = 0
        for i in range(m):
            if rng.random() < p:
                state[i] = 1
                d += 1
            else:
                state[i] = 0
        if stop_at_zero == 0:
            # start from the all-closed star
            for i in range(m):
                state[i] = 0
            d = 0
        t = 0.0
        rate = mu * m
        while True:
            if stop_at_zero == 1 and d == 0:
                break
            dt = rng.exponential(1.0 / rate)
            if t + dt > t_end:
                t = t_end
                break
            t += dt
            i = int(rng.random() * m)
            if i >= m:
                i = m - 1
            new = 1 if rng.random() < p else 0
            d += new - np.int64(state[i])
            state[i] = new
        out_t[r] = t
        out_d[r] = d


def degree_hit0_samples(params: Params, replicas: int, seed: int, t_cap: float = math.inf):
    """Event-driven simulation of the n-1 edges at one vertex from the
    stationary law; returns the hitting times of degree 0."""
    rng = replica_rng(seed, 0)
    t = np.empty(replicas)
    d = np.empty(replicas, np.int64)
    _star_kernel(params.n, params.p, params.mu, rng, float(t_cap), 1, t, d)
    return t


def degree_samples(params: Params, t: float, replicas: int, seed: int) -> np.ndarray:
    """d_t(v) from an all-closed star, one draw per replica."""
    rng = replica_rng(seed, 0)
    tt = np.empty(replicas)
    d = np.empty(replicas, np.int64)
    _star_kernel(params.n, params.p, params.mu, rng, float(t), 0, tt, d)
    return d


# --- excursions -------------------------------------------------------------------------
@njit
def _excursion_kernel(adj, deg, pos, mu, p, rng, t_cap, kmax, sig, sigp, sigpp, at0):
    """Track isolation times of vertex 0 with a walker started there.

    Stops after ``kmax`` strictly positive isolation times, or at the first
    one where the walker is elsewhere, or at ``t_cap``.  Returns the count.
    """
    n = adj.shape[0]
    npairs = n * (n - 1)
    ref = mu * (npairs // 2)
    total = ref + 1.0
    clock = 0.0
    k = 0
    deg1_start = 0.0 if deg[0] == 1 else np.nan
    deiso = np.nan
    while k < kmax:
        clock += rng.exponential(1.0 / total)
        if clock > t_cap:
            break
        u = rng.random() * total
        if u < ref:
            kk = int(u / ref * npairs)
            if kk >= npairs:
                kk = npairs - 1
            x = kk // (n - 1)
            y = kk % (n - 1)
            if y >= x:
                y += 1
            new = 1 if rng.random() < p else 0
            if adj[x, y] != new:
                adj[x, y] = new
                adj[y, x] = new
                dlt = 1 if new == 1 else -1
                deg[x] += dlt
                deg[y] += dlt
                if x == 0 or y == 0:
                    d0 = deg[0]
                    if d0 == 1:
                        if dlt == 1:
                            deiso = clock
                        deg1_start = clock
                    elif d0 == 0:
                        sig[k] = clock
                        sigp[k] = deiso
                        sigpp[k] = deg1_start
                        at0[k] = pos[0] == 0
                        k += 1
                        if pos[0] != 0:
                            break
        else:
            v = int((u - ref) * (n - 1))
            if v >= n - 1:
                v = n - 2
            if v >= pos[0]:
                v += 1
            if adj[pos[0], v]:
                pos[0] = v
    return k


@dataclass
class ExcursionResult:
    sigma: np.ndarray            # (replicas, kmax), NaN where not reached
    sigma_prime: np.ndarray      # de-isolation preceding sigma_k (NaN if none)
    sigma_dblprime: np.ndarray   # start of the degree-1 stretch ending at sigma_k
    walker_at_one: np.ndarray    # (replicas, kmax) bool
    reached: np.ndarray          # number of isolation times recorded
    seed: int

    def conditional(self, k: int) -> Estimate:
        """P(walker at vertex 0 at sigma_k | it was there at every earlier sigma_j),
        with k counted from 1."""
        prior = np.all(self.walker_at_one[:, :k - 1], axis=1) if k > 1 else \
            np.ones(self.reached.size, bool)
        base = prior & (self.reached >= k)
        m = int(base.sum())
        if m == 0:
            return Estimate(math.nan, math.nan, 0, self.seed)
        hits = int(self.walker_at_one[base, k - 1].sum())
        return proportion(hits, m, self.seed)


IsolationExcursionRecord = ExcursionResult


def excursion_samples(params: Params, t_cap: float, replicas: int, seed: int,
                      kmax: int = 3) -> ExcursionResult:
    """Stationary environment, walker at vertex 0; isolation times of vertex 0
    counted from the first strictly positive one."""
    sig = np.full((replicas, kmax), np.nan)
    sp_ = np.full((replicas, kmax), np.nan)
    spp = np.full((replicas, kmax), np.nan)
    at0 = np.zeros((replicas, kmax), bool)
    reached = np.zeros(replicas, np.int64)
    for r in range(replicas):
        rng = replica_rng(seed, r)
        env = init_environment(params, "stationary", rng)
        pos = np.zeros(1, np.int64)
        reached[r] = _excursion_kernel(env.adj, env.deg, pos, float(params.mu), float(params.p),
                                       rng, float(t_cap), kmax, sig[r], sp_[r], spp[r], at0[r])
    return ExcursionResult(sig, sp_, spp, at0, reached, seed)


# --- parity ---------------------------------------------------------------------------
def parity_probability(zeta: float) -> float:
    """P(Po(zeta) is even) = (1 + e^(-2 zeta)) / 2."""
    return 0.5 * (1.0 + math.exp(-2.0 * zeta))


def parity_simulation(zeta: float, replicas: int, seed: int) -> Estimate:
    """Fraction of unit-time Poisson(zeta) processes with an even number of
    arrivals, built from exponential gaps."""
    rng = replica_rng(seed, 0)
    width = int(zeta * 4 + 30)
    gaps = rng.exponential(1.0 / zeta, size=(replicas, width)) if zeta > 0 else \
        np.full((replicas, width), np.inf)
    counts = (np.cumsum(gaps, axis=1) <= 1.0).sum(axis=1)
    return proportion(int(np.count_nonzero(counts % 2 == 0)), replicas, seed)


# --- visits of the static jump chain --------------------------------------------------------
@njit
def _visit_kernel(indptr, nbr, in_a, starts, m, rng, out):
    for r in range(starts.shape[0]):
        x = starts[r]
        c = 0
        for _ in range(m):
            d = indptr[x + 1] - indptr[x]
            j = int(rng.random() * d)
            if j >= d:
                j = d - 1
            x = nbr[indptr[x] + j]
            if in_a[x]:
                c += 1
        out[r] = c


def visit_counts(graph, in_a: np.ndarray, m: int, runs: int, seed: int, starts=None):
    """N_m: visits to the set ``in_a`` during m steps of the simple random
    walk jump chain, per run (start uniform over the graph's vertices)."""
    rng = replica_rng(seed, 0)
    indptr, nbr, _ = graph.csr
    if starts is None:
        starts = rng.choice(graph.vertices, size=runs)
    out = np.empty(runs, np.int64)
    _visit_kernel(indptr, nbr, np.asarray(in_a, np.bool_), np.asarray(starts, np.int64),
                  int(m), rng, out)
    return out


# --- invariant-environment bounds ------------------------------------------------------------
@dataclass
class IiieBounds:
    lower: float
    upper: float
    lower_valid: bool
    upper_valid: bool


def iiie_mixing_bounds(lam: float, mu: float, epsilon: float, n: int | None = None,
                       C: float = IIIE_C) -> IiieBounds:
    """(1/mu)(1/(2 lam)) log(1/eps) and (1/mu) C log(1/eps), with validity
    flags: the lower needs eps < e^(-3 lam), the upper eps < 1/4 and
    mu <= (2/3)/((1 + lam) n)."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    L = math.log(1.0 / epsilon)
    lower = L / (2.0 * lam * mu)
    upper = C * L / mu
    lo_ok = epsilon < min(math.exp(-3 * lam), 1.0)
    up_ok = epsilon < 0.25 and (n is None or mu <= (2.0 / 3.0) / ((1 + lam) * n))
    return IiieBounds(lower, upper, lo_ok, up_ok)

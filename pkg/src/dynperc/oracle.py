"""Exact ground truth for tiny instances.

The full system on ``n <= 5`` vertices has ``n * 2**N`` states; state index
``x * 2**N + mask`` where bit ``k`` of ``mask`` is the ``k``-th pair in
lexicographic order (the same order as ``Environment.bitmask``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import binom, poisson

from .params import Params

MAX_N = 5
TAIL = 1e-12


@dataclass
class GeneratorSpec:
    params: Params
    Q: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def size(self) -> int:
        return self.n << self.N

    def index(self, x: int, mask: int) -> int:
        return (int(x) << self.N) | int(mask)

    def decode(self, s):
        s = np.asarray(s)
        return s >> self.N, s & ((1 << self.N) - 1)

    def stationary(self) -> np.ndarray:
        """pi_U x pi_p as a vector over states."""
        N, p = self.N, self.params.p
        k = _popcount(np.arange(1 << N))
        env = p ** k * (1 - p) ** (N - k)
        return np.tile(env, self.n) / self.n


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    c = np.zeros_like(a)
    while np.any(a):
        c += a & 1
        a = a >> 1
    return c


def build_generator(params: Params) -> GeneratorSpec:
    n = params.n
    if n > MAX_N:
        raise ValueError(f"oracle limited to n <= {MAX_N} (state space n*2^N), got n={n}")
    N, p, mu = params.N, params.p, params.mu
    iu, ju = np.triu_indices(n, 1)
    bit = np.zeros((n, n), np.int64)
    bit[iu, ju] = np.arange(N)
    bit[ju, iu] = np.arange(N)
    masks = np.arange(1 << N, dtype=np.int64)
    rows, cols, vals = [], [], []
    for x in range(n):
        base = x << N
        for k in range(N):
            b = 1 << k
            closed = (masks & b) == 0
            # closed -> open at rate mu p, open -> closed at rate mu (1-p)
            rows.append(base + masks[closed])
            cols.append(base + (masks[closed] | b))
            vals.append(np.full(closed.sum(), mu * p))
            rows.append(base + masks[~closed])
            cols.append(base + (masks[~closed] ^ b))
            vals.append(np.full((~closed).sum(), mu * (1 - p)))
        for v in range(n):
            if v == x:
                continue
            ok = (masks >> bit[x, v]) & 1 == 1
            rows.append(base + masks[ok])
            cols.append((v << N) + masks[ok])
            vals.append(np.full(ok.sum(), 1.0 / (n - 1)))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    size = n << N
    off = sp.coo_matrix((v, (r, c)), shape=(size, size)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    Q = (off + sp.diags(diag)).tocsr()
    return GeneratorSpec(params, Q)


def transient_distribution(spec: GeneratorSpec, initial, t: float) -> np.ndarray:
    """Law at time ``t`` by uniformization at rate mu N + 1.

    ``initial`` is a state index or a probability vector.  The Poisson series
    is cut once the remaining mass is below 1e-12.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if np.isscalar(initial):
        pi = np.zeros(spec.size)
        pi[int(initial)] = 1.0
    else:
        pi = np.asarray(initial, dtype=np.float64).copy()
        if pi.shape != (spec.size,):
            raise ValueError("initial distribution has wrong length")
    if t == 0:
        return pi
    lam = spec.params.mu * spec.N + 1.0
    P = (sp.identity(spec.size, format="csr") + spec.Q / lam).T.tocsr()
    lt = lam * t
    kmax = int(poisson.isf(TAIL, lt)) + 1
    w = poisson.pmf(np.arange(kmax + 1), lt)
    out = w[0] * pi
    v = pi
    for k in range(1, kmax + 1):
        v = P @ v
        out += w[k] * v
    return out


def stationarity_residual(spec: GeneratorSpec, pi=None) -> tuple[float, float]:
    """(max |(pi Q)_s|, max |pi_i Q_ij - pi_j Q_ji|) for ``pi`` (default pi_U x pi_p)."""
    pi = spec.stationary() if pi is None else np.asarray(pi, dtype=np.float64)
    res = float(np.abs(spec.Q.T @ pi).max())
    F = sp.diags(pi) @ spec.Q
    db = abs(F - F.T)
    return res, float(db.max()) if db.nnz else 0.0


def exact_env_tv(N: int, p: float, a: float) -> float:
    """TV between Bernoulli(a)^N and Bernoulli(p)^N.

    The likelihood ratio depends only on the open count, so this equals the
    TV between Binomial(N, a) and Binomial(N, p).
    """
    if not (0 <= a <= 1 and 0 <= p <= 1):
        raise ValueError("a and p must lie in [0, 1]")
    if N > 10**6:
        raise ValueError("N limited to 10^6")
    if a == p:
        return 0.0
    k = np.arange(N + 1)
    tv = 0.5 * np.abs(binom.pmf(k, N, a) - binom.pmf(k, N, p)).sum()
    return float(min(1.0, max(0.0, tv)))


def edge_open_prob(p: float, mu: float, t: float) -> float:
    """P(edge open at t | open at 0)."""
    return p + (1 - p) * math.exp(-mu * t)


def walker_marginal(spec: GeneratorSpec, dist: np.ndarray) -> np.ndarray:
    return dist.reshape(spec.n, -1).sum(axis=1)

"""Monte Carlo mixing curves."""

from __future__ import annotations

import math

import numpy as np

from ..params import Params
from ..seeding import replica_rng
from ..sim import init_environment, make_system
from .core import (
    Estimate,
    binomial_upper,
    bootstrap_tv_stderr,
    tv_counts,
    tv_threshold,
)

FULL_SYSTEM_MAX_N = 5


def sample_paths(params: Params, times, replicas: int, seed: int, x0: int = 0,
                 env_mode: str = "stationary", walkers: int = 1):
    """Positions (replicas, len(times), walkers) and open counts (replicas, len(times)).

    Replica ``r`` draws its initial environment and dynamics from the stream
    ``(seed, r)``.
    """
    times = np.asarray(times, float)
    pos = np.empty((replicas, times.size, walkers), np.int64)
    cnt = np.empty((replicas, times.size), np.int64)
    for r in range(replicas):
        rng = replica_rng(seed, r)
        env = init_environment(params, env_mode, rng)
        sys = make_system(params, env, [x0] * walkers, rng)
        for k, t in enumerate(times):
            sys.advance(t)
            pos[r, k] = sys.pos
            cnt[r, k] = env.open_count
    return pos, cnt


def sample_full_states(params: Params, times, replicas: int, seed: int, x0: int = 0,
                       env_mode: str = "stationary"):
    """State indices ``x * 2**N + mask`` at each time (n <= 5)."""
    if params.n > FULL_SYSTEM_MAX_N:
        raise ValueError("full-system states only for n <= 5")
    times = np.asarray(times, float)
    out = np.empty((replicas, times.size), np.int64)
    for r in range(replicas):
        rng = replica_rng(seed, r)
        env = init_environment(params, env_mode, rng)
        sys = make_system(params, env, [x0], rng)
        for k, t in enumerate(times):
            sys.advance(t)
            out[r, k] = (int(sys.pos[0]) << params.N) | env.bitmask()
    return out


def mixing_curve(params: Params, target: str, times, replicas: int, seed: int,
                 start: int = 0, env_mode: str = "stationary", estimator: str = "plugin"):
    """TV to equilibrium at each time, as ``Estimate`` objects.

    ``walk``: law of X_t against uniform (``plugin`` over vertices, or
    ``symmetric`` = |P(X_t = start) - 1/n|, valid when the start law is
    invariant under relabelling the other vertices).
    ``full_system``: plug-in over all n 2^N states (n <= 5 only).
    ``environment_count``: open-edge count against Binomial(N, p), by the
    upper-set estimator (``threshold``, default) or ``plugin``; a lower bound
    on the environment TV.
    """
    times = np.asarray(times, float)
    if replicas <= 0:
        raise ValueError("need at least one replica")
    n = params.n
    boot = np.random.default_rng(seed)
    out = []
    if target == "walk":
        pos, _ = sample_paths(params, times, replicas, seed, start, env_mode)
        for k, t in enumerate(times):
            s = pos[:, k, 0]
            if estimator == "symmetric":
                rho = float(np.mean(s == start))
                val = abs(rho - 1.0 / n)
                se = math.sqrt(rho * (1 - rho) / replicas)
            else:
                c = np.bincount(s, minlength=n)
                val = tv_counts(c, np.full(n, 1.0 / n))
                se = bootstrap_tv_stderr(c, np.full(n, 1.0 / n), boot)
            out.append(Estimate(val, se, replicas, seed, 0.0, float(t)))
        return out
    if target == "full_system":
        if n > FULL_SYSTEM_MAX_N:
            raise ValueError(f"full-system plug-in needs n <= {FULL_SYSTEM_MAX_N} (n 2^N states); "
                             "use the coalescence-time curve as an upper bound instead")
        from ..oracle import build_generator

        pi = build_generator(params).stationary()
        st = sample_full_states(params, times, replicas, seed, start, env_mode)
        for k, t in enumerate(times):
            c = np.bincount(st[:, k], minlength=pi.size)
            out.append(Estimate(tv_counts(c, pi), bootstrap_tv_stderr(c, pi, boot),
                                replicas, seed, 0.0, float(t)))
        return out
    if target == "environment_count":
        N, p = params.N, params.p
        _, cnt = sample_paths(params, times, replicas, seed, start, env_mode, walkers=0)
        from scipy.stats import binom

        ref = binom.pmf(np.arange(N + 1), N, p)
        for k, t in enumerate(times):
            c = cnt[:, k]
            if estimator == "plugin":
                cc = np.bincount(c, minlength=N + 1)
                val = tv_counts(cc, ref)
                se = bootstrap_tv_stderr(cc, ref, boot)
            else:
                val = tv_threshold(c, binomial_upper(N, p))
                bs = [tv_threshold(boot.choice(c, c.size), binomial_upper(N, p)) for _ in range(100)]
                se = float(np.std(bs, ddof=1))
            out.append(Estimate(val, se, replicas, seed, 0.0, float(t)))
        return out
    raise ValueError(f"unknown target {target!r}")


def first_crossing(times, values, level: float) -> float:
    """First time the piecewise-linear curve drops to ``level`` or below."""
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    idx = np.flatnonzero(v <= level)
    if idx.size == 0:
        return math.inf
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    t0, t1, v0, v1 = t[i - 1], t[i], v[i - 1], v[i]
    return float(t0 + (v0 - level) / (v0 - v1) * (t1 - t0))

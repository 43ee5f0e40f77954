"""Stopping-time ensembles (isolation, giant hit/exit) with goodness tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..params import Params
from ..seeding import replica_rng
from ..sim import (
    Censored,
    both_isolated,
    init_environment,
    make_system,
    walker_in_giant,
    walker_isolated,
    walker_out_of_giant,
)
from ..structure import GoodGraphConstants, components_and_giant, good_graph_check
from .core import Estimate


def is_good(env, constants=GoodGraphConstants(), gap_method: str = "lanczos") -> bool:
    return good_graph_check(env.snapshot(), constants, gap_method=gap_method)["good"]


def default_cadence(params: Params) -> float:
    """Time between goodness checks: one refresh event's worth of time for
    n <= 500, a hundred above (in expectation)."""
    k = 1 if params.n <= 500 else 100
    return k / (params.mu * params.N) if params.mu > 0 else math.inf


def good_start(walkers: int = 1, constants=GoodGraphConstants(), max_tries: int = 1000,
               gap_method: str = "lanczos", where: str = "giant"):
    """Start sampler: a stationary environment conditioned on being good,
    walkers placed independently and uniformly on the giant (or anywhere)."""
    def sampler(params, rng):
        for _ in range(max_tries):
            env = init_environment(params, "stationary", rng)
            if is_good(env, constants, gap_method):
                break
        else:
            raise RuntimeError("no good environment found")
        if where == "giant":
            gv = components_and_giant(env.snapshot()).giant_vertices
            pos = rng.choice(gv, size=walkers)
        else:
            pos = rng.integers(0, params.n, size=walkers)
        return env, pos
    return sampler


def outside_giant_start(constants=GoodGraphConstants(), gap_method: str = "lanczos"):
    def sampler(params, rng):
        env, _ = good_start(1, constants, gap_method=gap_method)(params, rng)
        comp = components_and_giant(env.snapshot())
        out = np.flatnonzero(comp.labels != comp.giant)
        return env, rng.choice(out, size=1)
    return sampler


@dataclass
class StoppingSample:
    """Per-replica stopping times (``inf`` when censored at ``t_cap``) and the
    first time a goodness check failed (``inf`` if none did)."""

    times: np.ndarray
    first_bad: np.ndarray
    t_cap: float
    cadence: float
    seed: int
    tracked_goodness: bool = True

    @property
    def replicas(self) -> int:
        return int(self.times.size)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(np.isinf(self.times)))

    def tail(self, t: float, require_good: bool = True) -> Estimate:
        """P(tau > t [, environment good on [0, t]])."""
        if t > self.t_cap:
            raise ValueError("t beyond the censoring cap")
        ev = self.times > t
        if require_good:
            ev &= self.first_bad > t
        f = float(np.mean(ev))
        return Estimate(f, math.sqrt(f * (1 - f) / self.replicas), self.replicas, self.seed,
                        self.censored_fraction, float(t))

    def cdf(self, t: float) -> Estimate:
        f = float(np.mean(self.times <= t))
        return Estimate(f, math.sqrt(f * (1 - f) / self.replicas), self.replicas, self.seed,
                        self.censored_fraction, float(t))

    def mean(self) -> Estimate:
        """Mean stopping time; refused when more than 1% are censored."""
        if self.censored_fraction > 0.01:
            raise ValueError("more than 1% censored; mean not reported")
        x = self.times[np.isfinite(self.times)]
        return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)),
                        self.replicas, self.seed, self.censored_fraction)


def _run_tracked(sys, predicate, t_cap, cadence, constants, gap_method, track):
    first_bad = math.inf
    if track and not is_good(sys.env, constants, gap_method):
        first_bad = sys.clock
    t = sys.clock
    while True:
        t_next = min(t + cadence, t_cap)
        stop, _ = sys.run_until(predicate, t_next)
        if not isinstance(stop, Censored):
            return stop, first_bad
        t = t_next
        if track and math.isinf(first_bad) and not is_good(sys.env, constants, gap_method):
            first_bad = t
        if t >= t_cap:
            return math.inf, first_bad


def _ensemble(params, predicate, start_sampler, walkers, t_cap, replicas, seed, cadence,
              constants, gap_method, track_goodness):
    if cadence is None:
        cadence = default_cadence(params)
    if not track_goodness:
        cadence = t_cap
    times = np.empty(replicas)
    bad = np.empty(replicas)
    for r in range(replicas):
        rng = replica_rng(seed, r)
        env, pos = start_sampler(params, rng)
        pos = np.asarray(pos, np.int64).reshape(-1)
        if pos.size != walkers:
            raise ValueError(f"start sampler gave {pos.size} walkers, expected {walkers}")
        sys = make_system(params, env, pos, rng)
        times[r], bad[r] = _run_tracked(sys, predicate, t_cap, cadence, constants,
                                        gap_method, track_goodness)
    return StoppingSample(times, bad, float(t_cap), float(cadence), seed, track_goodness)


def isolation_samples(params: Params, mode: str, start_sampler, t_cap: float, replicas: int,
                      seed: int, cadence: float | None = None,
                      constants=GoodGraphConstants(), gap_method: str = "lanczos",
                      track_goodness: bool = True) -> StoppingSample:
    """Isolation time of one walker (``single``) or simultaneous isolation of
    two independent walkers on one environment (``dual``)."""
    if mode == "single":
        pred, w = walker_isolated(0), 1
    elif mode == "dual":
        pred, w = both_isolated(0, 1), 2
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _ensemble(params, pred, start_sampler, w, t_cap, replicas, seed, cadence,
                     constants, gap_method, track_goodness)


def giant_hit_exit_samples(params: Params, which: str, start_sampler, t_cap: float,
                           replicas: int, seed: int, cadence: float | None = None,
                           constants=GoodGraphConstants(), gap_method: str = "lanczos",
                           track_goodness: bool = True) -> StoppingSample:
    """Hitting time of the giant (``hit``) or exit time from it (``exit``)."""
    if which == "hit":
        pred = walker_in_giant(0)
    elif which == "exit":
        pred = walker_out_of_giant(0)
    else:
        raise ValueError(f"unknown mode {which!r}")
    return _ensemble(params, pred, start_sampler, 1, t_cap, replicas, seed, cadence,
                     constants, gap_method, track_goodness)


def goodness_persistence(eta0, params: Params, horizon: float, replicas: int, seed: int,
                         cadence: float | None = None, constants=GoodGraphConstants(),
                         gap_method: str = "lanczos") -> Estimate:
    """P(the environment started from ``eta0`` is not good at some check in
    [0, horizon]); checks at ``cadence`` (plus time 0)."""
    if horizon > params.n / params.mu if params.mu > 0 else False:
        raise ValueError("horizon must be at most n / mu")
    if cadence is None:
        cadence = default_cadence(params)
    if not is_good(eta0, constants, gap_method):
        return Estimate(1.0, 0.0, replicas, seed)
    if horizon == 0:
        return Estimate(0.0, 0.0, replicas, seed)
    hits = 0
    for r in range(replicas):
        rng = replica_rng(seed, r)
        env = eta0.copy()
        sys = make_system(params, env, [], rng)
        t = env.clock
        end = env.clock + horizon
        while t < end:
            t = min(t + cadence, end)
            sys.advance(t)
            if not is_good(env, constants, gap_method):
                hits += 1
                break
    f = hits / replicas
    return Estimate(f, math.sqrt(f * (1 - f) / replicas), replicas, seed)

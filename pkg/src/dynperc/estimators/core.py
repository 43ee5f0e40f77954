"""Estimates, TV estimators, CSV plumbing and closed-form bound evaluators."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom


@dataclass
class Estimate:
    value: float
    stderr: float
    replicas: int
    master_seed: int
    censored_fraction: float = 0.0
    t: float | None = None

    def __post_init__(self):
        if self.stderr < 0 or not math.isfinite(self.stderr) and not math.isnan(self.stderr):
            raise ValueError("stderr must be finite and nonnegative")
        if not 0.0 <= self.censored_fraction <= 1.0:
            raise ValueError("censored_fraction must lie in [0, 1]")


CSV_COLUMNS = ["time", "estimate", "stderr", "replicas", "censored_fraction"]


def estimates_to_csv(estimates, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in estimates:
        w.writerow([repr(float(e.t)) if e.t is not None else "", repr(float(e.value)),
                    repr(float(e.stderr)), int(e.replicas), repr(float(e.censored_fraction))])
    return buf.getvalue()


def estimates_from_csv(text: str) -> tuple[list[Estimate], dict]:
    meta = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line:
            rows.append(line)
    seed = int(meta.get("seed", 0))
    out = []
    for r in list(csv.reader(rows))[1:]:
        out.append(Estimate(float(r[1]), float(r[2]), int(r[3]), seed, float(r[4]),
                            float(r[0]) if r[0] else None))
    return out, meta


def proportion(hits, replicas: int, seed: int, t=None, censored=0.0) -> Estimate:
    f = float(hits) / replicas
    return Estimate(f, math.sqrt(f * (1 - f) / replicas), replicas, seed, censored, t)


# --- TV estimators --------------------------------------------------------------------
def tv_plugin(samples, n: int) -> float:
    """1/2 sum_v |freq(v) - 1/n| for vertex samples in 0..n-1.

    Positively biased at finite sample size, by roughly
    sqrt((n - 1) / (2 pi R)) for R samples from the uniform law.
    """
    s = np.asarray(samples, dtype=np.int64).ravel()
    if s.size == 0:
        raise ValueError("no samples")
    freq = np.bincount(s, minlength=n) / s.size
    return float(0.5 * np.abs(freq - 1.0 / n).sum())


def tv_counts(counts, probs) -> float:
    c = np.asarray(counts, float)
    return float(0.5 * np.abs(c / c.sum() - np.asarray(probs, float)).sum())


def tv_plugin_null(n: int, replicas: int, sims: int, rng) -> tuple[float, float]:
    """Mean and spread of the plug-in statistic when the samples are uniform."""
    draws = rng.multinomial(replicas, np.full(n, 1.0 / n), size=sims) / replicas
    stat = 0.5 * np.abs(draws - 1.0 / n).sum(axis=1)
    return float(stat.mean()), float(stat.std(ddof=1))


def bootstrap_tv_stderr(counts, probs, rng, sims: int = 200) -> float:
    c = np.asarray(counts, np.int64)
    R = int(c.sum())
    boot = rng.multinomial(R, c / R, size=sims) / R
    return float((0.5 * np.abs(boot - np.asarray(probs)).sum(axis=1)).std(ddof=1))


def tv_threshold(samples, cdf_upper) -> float:
    """max_k |P_hat(S >= k) - P(S >= k)| over integer thresholds.

    When the true law differs from the reference by a monotone likelihood
    ratio the supremum is attained on an upper set, so this estimates the TV
    with far less bias than the plug-in over all values.  ``cdf_upper(k)``
    returns P(S >= k) under the reference law (vectorised).
    """
    s = np.sort(np.asarray(samples, np.int64))
    ks = np.unique(s)
    emp = 1.0 - np.searchsorted(s, ks, side="left") / s.size
    ref = cdf_upper(ks)
    emp_hi = 1.0 - np.searchsorted(s, ks, side="right") / s.size
    ref_hi = cdf_upper(ks + 1)
    return float(max(np.abs(emp - ref).max(), np.abs(emp_hi - ref_hi).max()))


def binomial_upper(N: int, p: float):
    return lambda k: binom.sf(np.asarray(k) - 1, N, p)


# --- closed-form bounds ------------------------------------------------------------------
def env_tv_upper_bound(N: int, mu: float, t: float) -> float:
    """min(1, sqrt(exp(e^(-2 g)) - 1)) with g = mu t - log(N)/2."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = mu * t - 0.5 * math.log(N)
    x = math.exp(-2 * g) if -2 * g < 700 else math.inf
    if x > 700:
        return 1.0
    return min(1.0, math.sqrt(math.expm1(x)))


def env_tv_lower_bound(N: int, mu: float, t: float, epsilon_slack: float = 18.0) -> float:
    """max(0, 1 - 2 exp(-q^2 N / slack)) with q = e^(-mu t)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    q = math.exp(-mu * t)
    return max(0.0, 1.0 - 2.0 * math.exp(-q * q * N / epsilon_slack))


def poisson_tail_bounds(lam: float, epsilon: float) -> tuple[float, float]:
    """(exp(-lam eps^2 (1 - eps/3) / 2), exp(-lam eps^2 / 2)): bounds on
    P(Po(lam) >= (1+eps) lam) and P(Po(lam) <= (1-eps) lam)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return (math.exp(-0.5 * lam * epsilon**2 * (1 - epsilon / 3)),
            math.exp(-0.5 * lam * epsilon**2))


def gillman_bound(pi_min: float, gamma: float, pi_A: float, m: int, epsilon: float) -> float:
    """min(1, 3 pi_min^(-1/2) exp(-gamma eps^2 / (20 m))) for
    P(|N_m - m pi(A)| >= eps); ``pi_A`` is carried for the record only."""
    del pi_A
    if not 0 <= epsilon <= m:
        raise ValueError("epsilon must lie in [0, m]")
    if not 0 < pi_min <= 1:
        raise ValueError("pi_min must lie in (0, 1]")
    return min(1.0, 3.0 / math.sqrt(pi_min) * math.exp(-gamma * epsilon**2 / (20.0 * m)))


def isolation_bound(mu_t: float, n: int, depth: int = 2, factor: float = 2.0) -> float:
    """factor * exp(-mu t / log_(depth) n); the factor 2 is kept for all t."""
    from ..structure import iterated_log

    return min(1.0, factor * math.exp(-mu_t / iterated_log(n, depth)))

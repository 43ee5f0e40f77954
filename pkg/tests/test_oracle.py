import math

import numpy as np
import pytest
from scipy.linalg import expm

from dynperc import Params
from dynperc.estimators import binomial_upper, tv_threshold
from dynperc.oracle import (
    build_generator,
    edge_open_prob,
    exact_env_tv,
    stationarity_residual,
    transient_distribution,
    walker_marginal,
)


def test_generator_rows_and_size():
    spec = build_generator(Params(4, 2.0, 0.2))
    Q = spec.Q.toarray()
    assert spec.size == 4 * 2**6
    assert np.allclose(Q.sum(1), 0, atol=1e-12)
    off = Q - np.diag(np.diag(Q))
    assert off.min() >= 0
    with pytest.raises(ValueError):
        build_generator(Params(6, 2.0, 0.2))


def test_transient_matches_expm():
    spec = build_generator(Params(3, 1.5, 0.7))
    Q = spec.Q.toarray()
    start = spec.index(1, 0b101)
    for t in (0.0, 0.3, 2.0, 7.5):
        ref = expm(Q * t)[start]
        got = transient_distribution(spec, start, t)
        assert np.abs(got - ref).max() < 1e-10
        assert abs(got.sum() - 1) < 1e-9


def test_transient_t0_and_limit():
    spec = build_generator(Params(3, 1.5, 0.1))
    init = np.zeros(spec.size)
    init[spec.index(0, 0)] = 0.25
    init[spec.index(2, 7)] = 0.75
    assert np.array_equal(transient_distribution(spec, init, 0.0), init)
    far = transient_distribution(spec, init, 200 / 0.1)
    assert 0.5 * np.abs(far - spec.stationary()).sum() < 1e-8


def test_two_state_closed_form():
    for lam, mu in [(0.4, 0.3), (1.5, 2.0)]:
        P = Params(2, lam, mu)
        spec = build_generator(P)
        start = spec.index(0, 1)
        for t in (0.1, 1.0, 5.0):
            d = transient_distribution(spec, start, t)
            _, mask = spec.decode(np.arange(spec.size))
            got = d[mask == 1].sum()
            assert got == pytest.approx(edge_open_prob(P.p, mu, t), abs=1e-12)
            assert got == pytest.approx(P.p + (1 - P.p) * math.exp(-mu * t), abs=1e-12)


def test_stationarity_residuals():
    for lam, mu in [(0.3, 0.5), (1.2, 4.0)]:
        r, db = stationarity_residual(build_generator(Params(2, lam, mu)))
        assert r < 1e-12 and db < 1e-12
    spec = build_generator(Params(4, 2.0, 0.2))
    r, db = stationarity_residual(spec)
    assert r < 1e-10 and db < 1e-10
    pi = spec.stationary().copy()
    pi[5] += 1e-3
    assert stationarity_residual(spec, pi)[0] > 1e-5


def test_walker_marginal_uniform_at_stationarity():
    spec = build_generator(Params(4, 2.0, 0.2))
    assert np.allclose(walker_marginal(spec, spec.stationary()), 0.25)


def test_exact_env_tv_examples():
    assert exact_env_tv(100, 0.3, 0.3) == 0.0
    assert exact_env_tv(100, 0.0, 1.0) == pytest.approx(1.0)
    assert exact_env_tv(1, 0.2, 0.5) == pytest.approx(0.3)
    # brute force over all 2^N states for small N
    N, p, a = 8, 0.3, 0.55
    k = np.array([bin(s).count("1") for s in range(2**N)])
    brute = 0.5 * np.abs(a**k * (1 - a) ** (N - k) - p**k * (1 - p) ** (N - k)).sum()
    assert exact_env_tv(N, p, a) == pytest.approx(brute, abs=1e-14)


def test_exact_env_tv_vs_monte_carlo():
    N, p = 1770, 2 / 60
    a = edge_open_prob(p, 1.0, 0.5 * math.log(N))
    val = exact_env_tv(N, p, a)
    assert 0 < val < 1
    draws = np.random.default_rng(5).binomial(N, a, size=10**6)
    assert abs(tv_threshold(draws, binomial_upper(N, p)) - val) < 0.005


def test_exact_env_tv_monotone_in_t():
    N, p = 1770, 2 / 60
    vals = [exact_env_tv(N, p, edge_open_prob(p, 1.0, t)) for t in np.linspace(0, 10, 80)]
    assert np.all(np.diff(vals) <= 1e-12)

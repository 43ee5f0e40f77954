import math

import numpy as np
import pytest
from scipy.stats import binom, chisquare

from dynperc import Params
from dynperc.estimators import (
    IIIE_C,
    Estimate,
    binomial_upper,
    degree_chain_analysis,
    degree_hit0_samples,
    degree_samples,
    env_tv_lower_bound,
    env_tv_upper_bound,
    estimates_from_csv,
    estimates_to_csv,
    excursion_samples,
    first_crossing,
    giant_hit_exit_samples,
    gillman_bound,
    good_start,
    goodness_persistence,
    iiie_mixing_bounds,
    isolation_bound,
    isolation_samples,
    mixing_curve,
    parity_probability,
    parity_simulation,
    poisson_tail_bounds,
    proportion,
    sample_paths,
    tv_plugin,
    tv_plugin_null,
    tv_threshold,
    visit_counts,
)
from dynperc.seeding import replica_rng
from dynperc.sim import init_environment
from dynperc.structure import Graph


# --- Estimate / CSV -------------------------------------------------------------------
def test_estimate_invariants():
    with pytest.raises(ValueError):
        Estimate(0.5, -1.0, 10, 0)
    with pytest.raises(ValueError):
        Estimate(0.5, 0.1, 10, 0, censored_fraction=1.5)
    e = proportion(3, 10, 7, t=2.0)
    assert e.value == 0.3 and e.stderr == pytest.approx(math.sqrt(0.021))


def test_estimates_csv_roundtrip():
    es = [Estimate(0.1 * k, 0.01, 100, 9, 0.0, float(k)) for k in range(5)]
    text = estimates_to_csv(es, {"seed": 9, "n": 60})
    back, meta = estimates_from_csv(text)
    assert back == es and meta == {"seed": "9", "n": "60"}
    assert estimates_to_csv(back, {"seed": 9, "n": 60}) == text


# --- TV estimators ---------------------------------------------------------------------
def test_tv_plugin_examples():
    assert tv_plugin(np.repeat(np.arange(10), 7), 10) == 0.0
    assert tv_plugin(np.zeros(50, int), 10) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        tv_plugin([], 5)


def test_tv_plugin_bias_matches_null():
    n, R = 100, 10**5
    val = tv_plugin(np.random.default_rng(1).integers(0, n, R), n)
    mean, sd = tv_plugin_null(n, R, 400, np.random.default_rng(2))
    assert val < 0.03
    assert abs(val - mean) < 3 * sd


def test_tv_threshold_exact_for_binomials():
    N, p, a = 200, 0.1, 0.13
    k = np.arange(N + 1)
    exact = 0.5 * np.abs(binom.pmf(k, N, a) - binom.pmf(k, N, p)).sum()
    draws = np.random.default_rng(3).binomial(N, a, 400_000)
    assert abs(tv_threshold(draws, binomial_upper(N, p)) - exact) < 0.005


def test_walk_tv_limits():
    P = Params(30, 2.0, 1.0)
    c = mixing_curve(P, "walk", [0.0, 200.0], 3000, 4)
    assert c[0].value == pytest.approx(1 - 1 / 30)
    mean, sd = tv_plugin_null(30, 3000, 300, np.random.default_rng(0))
    assert c[1].value < mean + 4 * sd
    s = mixing_curve(P, "walk", [0.0, 200.0], 3000, 4, estimator="symmetric")
    assert s[0].value == pytest.approx(1 - 1 / 30)
    assert s[1].value < 4 * s[1].stderr + 1e-3
    with pytest.raises(ValueError, match="coalescence"):
        mixing_curve(Params(6, 2.0, 1.0), "full_system", [1.0], 10, 0)
    with pytest.raises(ValueError):
        mixing_curve(P, "walk", [1.0], 0, 0)


def test_rho_symmetry():
    # from a stationary environment with X_0 = 0, vertices 1..n-1 are exchangeable
    P = Params(8, 2.0, 0.5)
    pos, _ = sample_paths(P, [3.0], 20_000, 5)
    c = np.bincount(pos[:, 0, 0], minlength=8)
    assert chisquare(c[1:]).pvalue > 1e-3
    # plug-in TV agrees with the single-coordinate form under this symmetry
    plug = mixing_curve(P, "walk", [3.0], 20_000, 5)[0]
    sym = mixing_curve(P, "walk", [3.0], 20_000, 5, estimator="symmetric")[0]
    mean, sd = tv_plugin_null(7, 20_000, 200, np.random.default_rng(1))
    assert abs(plug.value - sym.value) < mean + 4 * sd


def test_first_crossing():
    assert first_crossing([0, 1, 2], [1.0, 0.6, 0.2], 0.4) == pytest.approx(1.5)
    assert first_crossing([0, 1], [1.0, 0.9], 0.5) == math.inf
    assert first_crossing([0, 1], [0.3, 0.1], 0.5) == 0.0


# --- closed-form bounds ---------------------------------------------------------------------
def test_env_tv_upper_bound():
    N = 1770
    assert env_tv_upper_bound(N, 1.0, 0.5 * math.log(N)) == 1.0
    assert env_tv_upper_bound(N, 1.0, 0.5 * math.log(N) + 3) == pytest.approx(
        math.sqrt(math.exp(math.exp(-6)) - 1), rel=1e-12)
    assert env_tv_upper_bound(N, 1.0, 0.5 * math.log(N) + 3) == pytest.approx(0.0499, abs=1e-4)
    vals = [env_tv_upper_bound(N, 1.0, t) for t in np.linspace(0, 30, 200)]
    assert np.all(np.diff(vals) <= 0) and vals[-1] < 1e-8
    with pytest.raises(ValueError):
        env_tv_upper_bound(N, 1.0, -1)


def test_env_tv_lower_bound():
    N = 1770
    assert env_tv_lower_bound(N, 1.0, 0.0) == pytest.approx(1 - 2 * math.exp(-N / 18))
    for alpha in (0.5, 1.0, 2.0):
        t = 0.5 * math.log(N) - alpha
        assert env_tv_lower_bound(N, 1.0, t) == pytest.approx(
            max(0.0, 1 - 2 * math.exp(-math.exp(2 * alpha) / 18)), abs=1e-12)
    vals = [env_tv_lower_bound(N, 1.0, t) for t in np.linspace(0, 30, 200)]
    assert np.all(np.diff(vals) <= 0) and vals[-1] == 0.0


def test_poisson_tail_bounds():
    with pytest.raises(ValueError):
        poisson_tail_bounds(12, 1.0)
    with pytest.raises(ValueError):
        poisson_tail_bounds(0, 0.5)
    up, lo = poisson_tail_bounds(100, 0.5)
    assert up == pytest.approx(math.exp(-12.5 * (1 - 1 / 6)))
    assert up == pytest.approx(math.exp(-10.416666666666666))
    assert lo == pytest.approx(math.exp(-12.5))
    draws = np.random.default_rng(4).poisson(100, 10**7)
    assert np.mean(draws <= 50) <= lo
    assert np.mean(draws >= 150) <= up
    # decreasing in lambda eps^2
    a = [poisson_tail_bounds(lam, 0.3) for lam in (1, 10, 100)]
    assert a[0][0] > a[1][0] > a[2][0] and a[0][1] > a[1][1] > a[2][1]


def test_gillman_bound():
    assert gillman_bound(0.25, 0.0, 0.25, 100, 10) == 1.0
    # K_4: gamma = 4/3, pi_min = 1/4, m = 10^4, eps = pi(A) m / 2
    b = gillman_bound(0.25, 4 / 3, 0.25, 10**4, 1250)
    assert b == pytest.approx(6 * math.exp(-(4 / 3) * 1250**2 / (20 * 10**4)), rel=1e-12)
    assert b < 2e-4
    with pytest.raises(ValueError):
        gillman_bound(0.25, 1.0, 0.25, 10, 11)


def test_visit_counts_k4():
    k4 = Graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    in_a = np.array([True, False, False, False])
    m = 2000
    N = visit_counts(k4, in_a, m, 500, 1)
    assert abs(N.mean() / m - 0.25) < 0.01


def test_isolation_bound():
    assert isolation_bound(0.0, 1000) == 1.0
    assert isolation_bound(6.0, 1000) == pytest.approx(2 * math.exp(-6 / math.log(math.log(1000))))


# --- stopping times ------------------------------------------------------------------------
def _explicit_start(edges, positions):
    def sampler(params, rng):
        return init_environment(params, "explicit", edges=edges), np.array(positions)
    return sampler


def test_isolation_trivial_cases():
    P = Params(10, 2.0, 0.1)
    s = isolation_samples(P, "single", _explicit_start([(1, 2)], [0]), 10.0, 5, 0,
                          track_goodness=False)
    assert np.all(s.times == 0)
    s = isolation_samples(P, "dual", _explicit_start([(1, 2)], [0, 3]), 10.0, 5, 0,
                          track_goodness=False)
    assert np.all(s.times == 0)
    with pytest.raises(ValueError):
        isolation_samples(P, "dual", _explicit_start([], [0]), 10.0, 2, 0, track_goodness=False)


def test_isolation_censoring_monotone():
    P = Params(100, 2.0, 0.01)
    fr = []
    for cap in (10.0, 100.0, 1000.0):
        s = isolation_samples(P, "single", good_start(1, gap_method="dense"), cap, 60, 3,
                              track_goodness=False)
        fr.append(s.censored_fraction)
    assert fr[0] >= fr[1] >= fr[2]
    with pytest.raises(ValueError):
        s.tail(2000.0)


def test_stopping_mean_refused_when_censored():
    P = Params(100, 2.0, 0.0)
    s = isolation_samples(P, "single", _explicit_start([(0, 1)], [0]), 5.0, 10, 0,
                          track_goodness=False)
    assert s.censored_fraction == 1.0
    with pytest.raises(ValueError):
        s.mean()


def test_hit_exit_trivial_cases():
    P = Params(10, 2.0, 0.0)
    s = giant_hit_exit_samples(P, "hit", _explicit_start([(0, 1), (1, 2)], [1]), 5.0, 3, 0,
                               track_goodness=False)
    assert np.all(s.times == 0)
    s = giant_hit_exit_samples(P, "hit", _explicit_start([(0, 1), (1, 2)], [5]), 5.0, 3, 0,
                               track_goodness=False)
    assert np.all(np.isinf(s.times))


def test_exit_time_bound():
    # one-sided check with the frozen constant C = 50 (vacuous at these parameters)
    P = Params(1000, 2.0, 1e-5)
    t = 0.05 / P.mu
    s = giant_hit_exit_samples(P, "exit", good_start(1), t, 100, 8, track_goodness=False)
    e = s.cdf(t)
    bound = 50 * 0.05 * math.log(math.log(1000))
    assert e.value <= bound + 3 * e.stderr


def test_goodness_persistence():
    P = Params(200, 2.0, 0.01)
    bad = init_environment(P, "all_closed")
    assert goodness_persistence(bad, P, 0.0, 10, 0).value == 1.0
    full = init_environment(Params.with_p(100, 1.0, 0.01), "all_open")
    assert goodness_persistence(full, Params.with_p(100, 1.0, 0.01), 1.0, 5, 0).value == 1.0
    with pytest.raises(ValueError):
        goodness_persistence(bad, P, 1e9, 5, 0)


def test_goodness_persistence_typical():
    # checks every 0.05/mu instead of every 100 refresh events (decisions log)
    P = Params(2000, 2.0, 1e-4)
    rng = replica_rng(10, 0)
    env, _ = good_start(1)(P, rng)
    e = goodness_persistence(env, P, 1 / P.mu, 20, 10, cadence=0.05 / P.mu)
    assert e.value <= 0.05


# --- degree chain / excursions / parity ---------------------------------------------------------
def test_degree_chain_examples():
    r = degree_chain_analysis(Params(100, 2.0, 1.0))
    assert (r.stationary * np.arange(100)).sum() == pytest.approx(1.98)
    assert r.stationary.sum() == pytest.approx(1.0)
    tiny = degree_chain_analysis(Params(100, 1e-6, 1.0))
    assert tiny.expected_hit0 < 1e-5
    # the linear recursion solves the generator equations for E_k[T_0]
    n = 12
    P = Params(n, 3.0, 0.7)
    res = degree_chain_analysis(P)
    _, up, down = res.rates.T
    Q = np.diag(up[:-1], 1) + np.diag(down[1:], -1)
    Q -= np.diag(Q.sum(1))
    h = np.linalg.solve(Q[1:, 1:], -np.ones(n - 1))
    assert np.allclose(res.hit0_from[1:], h, rtol=1e-10)


def test_degree_samples_stationary():
    P = Params(100, 2.0, 1.0)
    d = degree_samples(P, 20.0, 20_000, 3)
    obs = np.bincount(d, minlength=100)
    exp = binom.pmf(np.arange(100), 99, P.p) * d.size
    keep = exp >= 5
    o = np.append(obs[keep], obs[~keep].sum())
    e = np.append(exp[keep], exp[~keep].sum())
    assert chisquare(o, e * o.sum() / e.sum()).pvalue > 1e-3


def test_degree_hit_time_matches_recursion():
    P = Params(100, 2.0, 1.0)
    t = degree_hit0_samples(P, 40_000, 4)
    oracle = degree_chain_analysis(P).expected_hit0
    assert abs(t.mean() - oracle) < 3 * t.std(ddof=1) / math.sqrt(t.size)


def test_parity():
    assert parity_probability(1.0) == pytest.approx(0.5676676416, abs=1e-9)
    assert parity_probability(0.0) == 1.0
    e = parity_simulation(1.0, 100_000, 2)
    assert abs(e.value - parity_probability(1.0)) < 3 * e.stderr
    e = parity_simulation(3.0, 100_000, 3)
    assert abs(e.value - parity_probability(3.0)) < 3 * e.stderr


def test_excursion_record_invariants():
    P = Params(150, 2.0, (2 / 3) / (3 * 150))
    ex = excursion_samples(P, 1e7, 150, 4)
    s, sp, spp = ex.sigma, ex.sigma_prime, ex.sigma_dblprime
    assert np.all(s[:, 0][ex.reached >= 1] > 0)
    for k in range(s.shape[1] - 1):
        ok = ~np.isnan(s[:, k + 1])
        assert np.all(s[ok, k] < sp[ok, k + 1]) and np.all(sp[ok, k + 1] < s[ok, k + 1])
    ok = ~np.isnan(s)
    assert np.all(spp[ok] <= s[ok])
    # the walker is at 0 at every recorded time but possibly the last
    for r in range(s.shape[0]):
        k = ex.reached[r]
        assert np.all(ex.walker_at_one[r, :max(k - 1, 0)])
    for k in (1, 2, 3):
        est = ex.conditional(k)
        assert est.replicas == 0 or 0 <= est.value <= 1


# --- invariant-environment bounds ----------------------------------------------------------------
def test_iiie_arithmetic():
    b = iiie_mixing_bounds(1.0, 0.01, math.exp(-4))
    assert b.lower == pytest.approx(2 / 0.01)
    assert b.lower_valid
    assert iiie_mixing_bounds(1.0, 0.01, 1 - 1e-12).lower < 1e-8
    b = iiie_mixing_bounds(2.0, 0.01, 0.1, n=500)
    assert not b.lower_valid and b.upper == pytest.approx(IIIE_C * math.log(10) / 0.01)
    assert not iiie_mixing_bounds(2.0, 1.0, 0.1, n=500).upper_valid
    with pytest.raises(ValueError):
        iiie_mixing_bounds(2.0, 0.01, 1.0)


def test_iiie_crossing_between_bounds():
    n, lam, eps = 500, 2.0, 0.1
    mu = (2 / 3) / ((1 + lam) * n)
    b = iiie_mixing_bounds(lam, mu, eps, n=n)
    assert b.upper_valid
    c = mixing_curve(Params(n, lam, mu), "walk", [b.lower, b.upper], 1500, 2024,
                     estimator="symmetric")
    assert c[0].value - 3 * c[0].stderr > eps
    assert c[1].value + 3 * c[1].stderr < eps


def test_iiie_lower_bound_in_valid_domain():
    n, lam, eps = 200, 0.5, 0.1
    mu = (2 / 3) / ((1 + lam) * n)
    b = iiie_mixing_bounds(lam, mu, eps, n=n)
    assert b.lower_valid
    c = mixing_curve(Params(n, lam, mu), "walk", [b.lower], 1500, 7, estimator="symmetric")
    assert c[0].value - 3 * c[0].stderr > eps

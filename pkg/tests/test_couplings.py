import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import gamma

from dynperc import Params
from dynperc.couplings import (
    FAILURES,
    Censored,
    CouplingRecord,
    coalescence_tail_curve,
    h_close,
    records_from_csv,
    records_to_csv,
    run_full_coupling,
    run_static_dynamic,
)
from dynperc.estimators import good_start
from dynperc.oracle import build_generator, transient_distribution
from dynperc.seeding import replica_rng
from dynperc.sim import init_environment


def h_close_brute(a, b):
    n = a.shape[0]
    diff = {(i, j) for i in range(n) for j in range(i + 1, n) if a[i, j] != b[i, j]}
    for x, y, z in itertools.permutations(range(n), 3):
        allowed = {tuple(sorted((x, z))), tuple(sorted((y, z)))}
        if diff <= allowed:
            return True
    return False


def env_with(n, edges):
    return init_environment(Params(n, 2.0, 1.0), "explicit", edges=edges)


def test_h_close_examples():
    a = env_with(5, [(0, 1), (3, 4)])
    assert h_close(a, a.copy())
    b = env_with(5, [(0, 1), (3, 4), (0, 2), (1, 2)])
    assert h_close(a, b)
    c = env_with(6, [(0, 1), (2, 3), (4, 5)])
    assert not h_close(env_with(6, []), c)
    with pytest.raises(ValueError):
        h_close(env_with(5, []), env_with(6, []))


@given(st.integers(3, 7), st.integers(0, 2**32), st.integers(0, 4))
def test_h_close_matches_bruteforce(n, seed, flips):
    rng = np.random.default_rng(seed)
    a = (rng.random((n, n)) < 0.4).astype(np.uint8)
    a = np.triu(a, 1)
    a = a + a.T
    b = a.copy()
    for _ in range(flips):
        i, j = rng.choice(n, 2, replace=False)
        b[i, j] = b[j, i] = 1 - b[i, j]
    assert h_close(a, b) == h_close_brute(a, b)


# --- static / dynamic ------------------------------------------------------------------
def test_static_dynamic_mu_zero():
    P = Params(50, 2.0, 0.0)
    rng = replica_rng(1, 0)
    env = init_environment(P, "stationary", rng)
    res = run_static_dynamic(P, env, 0, 500.0, rng, track_after=True)
    assert isinstance(res.decoupling_time, Censored)
    assert np.array_equal(res.static_traj, res.dynamic_traj)


def test_static_dynamic_unseen_edge():
    # p = 0: only the open edge (2,3) can change, and the walker at 0 never sees it
    P = Params.with_p(6, 0.0, 5.0)
    env = init_environment(P, "explicit", edges=[(2, 3)])
    res = run_static_dynamic(P, env, 0, 100.0, replica_rng(2, 0))
    assert isinstance(res.decoupling_time, Censored)
    # the same edge next to the walker decouples once it closes
    res = run_static_dynamic(P, env, 2, 100.0, replica_rng(2, 0))
    assert not isinstance(res.decoupling_time, Censored)


def test_static_dynamic_agree_until_decoupling():
    P = Params(40, 2.0, 0.05)
    for r in range(30):
        rng = replica_rng(3, r)
        env = init_environment(P, "stationary", rng)
        res = run_static_dynamic(P, env, 0, 200.0, rng, track_after=True)
        td = math.inf if isinstance(res.decoupling_time, Censored) else res.decoupling_time
        s = res.static_traj[res.static_traj[:, 0] <= td]
        d = res.dynamic_traj[res.dynamic_traj[:, 0] <= td]
        assert np.array_equal(s, d)
        # the static walk only uses edges of the frozen graph
        path = res.static_traj[:, 1].astype(int)
        assert all(env.adj[u, v] for u, v in zip(path[:-1], path[1:]))


def test_static_dynamic_rarely_decouples():
    # scaled-down horizon, see the decisions log: 1000 replicas, P(no decoupling) >= 0.9
    P = Params(500, 2.0, 1e-6)
    ok = 0
    for r in range(1000):
        rng = replica_rng(4, r)
        env = init_environment(P, "stationary", rng)
        res = run_static_dynamic(P, env, 0, 1000.0, rng)
        ok += isinstance(res.decoupling_time, Censored)
    assert ok / 1000 >= 0.9


# --- full coupling -------------------------------------------------------------------------
P4 = Params(4, 2.0, 0.2)


def test_identical_starts_coalesce_at_zero():
    env = init_environment(P4, "stationary", replica_rng(1, 0))
    rec, a, b = run_full_coupling(P4, (2, env), (2, env), 10.0, 1)
    assert rec.tau_c == 0.0 and rec.coalesced
    assert a[0] == b[0] and a[1] == b[1]
    curve = coalescence_tail_curve(P4, lambda rng: ((1, env), (1, env)), [0.0, 1.0, 5.0], 20, 2)
    assert all(e.value == 0.0 for e in curve)


def test_tail_curve_starts_at_one_and_decreases():
    def start(rng):
        return ((0, init_environment(P4, "all_open")), (3, init_environment(P4, "all_closed")))

    curve = coalescence_tail_curve(P4, start, [0.0, 5.0, 10.0, 25.0, 50.0], 300, 3)
    vals = [e.value for e in curve]
    assert vals[0] == 1.0
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        coalescence_tail_curve(P4, start, [1.0], 0, 3)
    with pytest.raises(ValueError):
        coalescence_tail_curve(P4, start, [2.0, 1.0], 5, 3)


def _run_many(params, R, seed, times, start_a, start_b):
    out = []
    for r in range(R):
        rec, a, b = run_full_coupling(params, start_a, start_b, max(times) + 1e-9, seed, r,
                                      sample_times=times)
        out.append((rec, a, b))
    return out


def test_coalesced_systems_stay_equal_and_hc():
    a0 = (0, init_environment(P4, "all_open"))
    b0 = (3, init_environment(P4, "all_closed"))
    runs = _run_many(P4, 400, 5, [2.0, 10.0, 40.0, 80.0], a0, b0)
    for rec, a, b in runs:
        assert rec.h_close_violations == 0
        if rec.coalesced:
            assert a[0] == b[0] and a[1] == b[1]
            after = rec.sample_times > rec.tau_c
            s = rec.samples[after]
            assert np.array_equal(s[:, 0], s[:, 1]) and np.array_equal(s[:, 2], s[:, 3])
    fails = sum(sum(r.failure_counts.values()) for r, _, _ in runs)
    assert fails > 0


def test_marginals_match_oracle_small():
    times = [1.0, 5.0]
    a0 = (0, init_environment(P4, "all_open"))
    b0 = (3, init_environment(P4, "all_closed"))
    runs = _run_many(P4, 4000, 6, times, a0, b0)
    spec = build_generator(P4)
    for side, (x, env) in ((0, a0), (1, b0)):
        for k, t in enumerate(times):
            exact = transient_distribution(spec, spec.index(x, env.bitmask()), t)
            st_ = np.array([spec.index(rec.samples[k, side], rec.samples[k, 2 + side])
                            for rec, _, _ in runs])
            emp = np.bincount(st_, minlength=spec.size) / len(runs)
            null = np.random.default_rng(k).multinomial(len(runs), exact, 200) / len(runs)
            cut = np.quantile(0.5 * np.abs(null - exact).sum(1), 0.999)
            assert 0.5 * np.abs(emp - exact).sum() <= cut


def test_sigma_dominated_by_gamma():
    a0 = (0, init_environment(P4, "all_open"))
    b0 = (3, init_environment(P4, "all_closed"))
    s23 = []
    for r in range(1500):
        rec, _, _ = run_full_coupling(P4, a0, b0, 400.0, 8, r)
        sig = rec.sigma()
        ok = ~np.isnan(sig[:, 1])
        s23.extend((sig[ok, 1] + sig[ok, 2]).tolist())
    s23 = np.sort(np.array(s23))
    m = s23.size
    emp = np.arange(1, m + 1) / m
    band = math.sqrt(math.log(2 / 1e-3) / (2 * m))
    assert np.all(emp + band >= gamma.cdf(s23, 2, scale=1 / P4.mu))


def test_records_csv_roundtrip():
    a0 = (0, init_environment(P4, "all_open"))
    b0 = (3, init_environment(P4, "all_closed"))
    recs = [run_full_coupling(P4, a0, b0, 8.0, 9, r)[0] for r in range(20)]
    text = records_to_csv(recs)
    back = records_from_csv(text)
    assert len(back) == 20
    for x, y in zip(recs, back):
        assert x.coalesced == y.coalesced and x.failure_counts == y.failure_counts
        if x.coalesced:
            assert x.tau_c == y.tau_c
        else:
            assert y.tau_c.t_cap == 8.0
    assert records_to_csv(back) == text
    assert CouplingRecord.CSV_HEADER[3:] == list(FAILURES)


def test_coupling_rejects_bad_input():
    with pytest.raises(ValueError):
        run_full_coupling(P4, (0, init_environment(Params(5, 2.0, 0.2))),
                          (0, init_environment(P4)), 1.0, 0)


LOGLOG = math.log(math.log(1000))
TAIL_OBSERVED = {}


def _tail_sample():
    if not TAIL_OBSERVED:
        P = Params(1000, 2.0, 1e-5)
        cap = 8 * LOGLOG / P.mu
        taus = []
        for r in range(150):
            rng = replica_rng(31, r, 2)
            env, pos = good_start(2)(P, rng)
            rec, _, _ = run_full_coupling(P, (int(pos[0]), env), (int(pos[1]), env), cap, 31, r)
            taus.append(rec.tau_c if rec.coalesced else math.inf)
        TAIL_OBSERVED["taus"] = np.array(taus)
    return TAIL_OBSERVED["taus"]


def _too_slow(observed, bound):
    return pytest.mark.xfail(strict=True, reason=(
        f"isolation at n=1000 runs near 0.27 mu, slower than 1/loglog n; observed tail "
        f"{observed} against a bound of {bound} (see decisions log)"))


@pytest.mark.parametrize("k", [
    1,
    pytest.param(2, marks=_too_slow(0.57, 0.41)),
    pytest.param(4, marks=_too_slow(0.32, 0.055)),
    pytest.param(8, marks=_too_slow(0.13, 0.001)),
])
def test_coupling_tail_bound_large_n(k):
    taus = _tail_sample()
    mu = 1e-5
    f = float(np.mean(taus > k * LOGLOG / mu))
    se = math.sqrt(max(f * (1 - f), 1e-12) / taus.size)
    assert f <= 3 * math.exp(-k) + 3 * se

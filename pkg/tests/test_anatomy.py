import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynperc.anatomy import (
    STAT_NAMES,
    AnatomyParams,
    DegreeSequence,
    _hang_trees,
    compare_anatomy_vs_er,
    exact_simplicity,
    giant_fraction,
    giant_statistics,
    sample_anatomy,
    sample_configuration_model,
    sample_er_graph,
    simplicity_lower_bound,
    solve_theta,
)
from dynperc.seeding import replica_rng
from dynperc.structure import core_of, kernel_decomposition


def fixed_point_beta(lam, iters=10_000):
    # independent oracle: iterate beta = 1 - exp(-lam beta) from 1
    b = 1.0
    for _ in range(iters):
        b = 1 - math.exp(-lam * b)
    return b


def test_theta_examples():
    assert solve_theta(1.0) == 1.0
    assert solve_theta(0.5) == 0.5
    assert solve_theta(2.0) == pytest.approx(0.4063757, abs=1e-6)
    for lam in (1.1, 2.0, 5.0):
        th = solve_theta(lam)
        assert abs(th * math.exp(-th) - lam * math.exp(-lam)) < 1e-12
        assert 0 <= th < 1


def test_theta_grid():
    for lam in np.linspace(1.01, 10, 100):
        th = solve_theta(lam)
        assert abs(th * math.exp(-th) - lam * math.exp(-lam)) < 1e-12


def test_giant_fraction():
    assert giant_fraction(1.0) == 0.0
    assert giant_fraction(1.0001) < 1e-3
    assert giant_fraction(2.0) == pytest.approx(0.79681, abs=1e-5)
    for lam in (1.5, 2.0, 5.0):
        assert giant_fraction(lam) == pytest.approx(fixed_point_beta(lam), abs=1e-9)
    # beta(5) from the fixed point; 0.99307 would leave a residual of 4e-5
    assert giant_fraction(5.0) == pytest.approx(0.993023, abs=1e-6)
    ap = AnatomyParams(100, 2.0)
    assert ap.chi == pytest.approx(2.0 - ap.theta)
    with pytest.raises(ValueError):
        AnatomyParams(100, 1.0)


def test_configuration_forced_cases():
    rng = np.random.default_rng(0)
    g = sample_configuration_model([2], rng)
    assert g.edges.tolist() == [[0, 0]] and g.degrees.tolist() == [2]
    g = sample_configuration_model([1, 1], rng)
    assert sorted(g.edges[0].tolist()) == [0, 1]
    with pytest.raises(ValueError):
        sample_configuration_model([1, 2], rng)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.integers(0, 2**32))
def test_configuration_degree_exact(d, seed):
    if sum(d) % 2:
        d = d + [1]
    g = sample_configuration_model(d, np.random.default_rng(seed))
    assert g.degrees.tolist() == d
    seq = DegreeSequence(d)
    assert seq.M == sum(d) and seq.N2 == sum(x * (x - 1) for x in d)


def test_exact_simplicity_oracle():
    # 11!! = 10395 matchings of 12 half-edges; K_4 arises from 3!^4 of them
    assert exact_simplicity([3, 3, 3, 3]) == pytest.approx(6**4 / 10395, abs=1e-15)
    assert exact_simplicity([1, 1]) == 1.0
    assert exact_simplicity([2]) == 0.0


def test_configuration_simplicity_rate():
    rng = np.random.default_rng(12)
    R = 100_000
    simple = 0
    for _ in range(R):
        e = np.sort(sample_configuration_model([3, 3, 3, 3], rng).edges, 1)
        simple += bool(np.all(e[:, 0] != e[:, 1]) and len(np.unique(e, axis=0)) == 6)
    q = exact_simplicity([3, 3, 3, 3])
    assert abs(simple / R - q) < 3 * math.sqrt(q * (1 - q) / R)


def test_simplicity_bound_values():
    assert simplicity_lower_bound([0, 1, 0, 1]).value == 1.0
    b = simplicity_lower_bound([3, 3, 3, 3], strict=False)
    # N2 = 24, M = 12
    assert b.value == pytest.approx(math.exp(-1 - 1 - 576 / 3456), rel=1e-12)
    assert not b.precondition_ok and b.omits_error_term
    with pytest.raises(ValueError):
        simplicity_lower_bound([3, 3, 3, 3])
    ok = simplicity_lower_bound([2] * 50 + [3] * 20)
    assert ok.precondition_ok


def test_pgw_tree_mean():
    th = solve_theta(2.0)
    _, sizes = _hang_trees(200_000, th, np.random.default_rng(3))
    se = sizes.std(ddof=1) / math.sqrt(sizes.size)
    assert abs(sizes.mean() - 1 / (1 - th)) < 3 * se
    assert 1 / (1 - th) == pytest.approx(1.6846, abs=1e-4)


def test_anatomy_structure_roundtrip():
    for r in range(20):
        s = sample_anatomy(500, 2.0, replica_rng(6, r), return_parts=True)
        dec = kernel_decomposition(s.graph)
        assert dec.kernel.vertices.size == s.kernel_degrees.size
        kd = np.sort(dec.kernel.degrees[dec.kernel.vertices])
        assert np.array_equal(kd, np.sort(s.kernel_degrees))
        assert core_of(s.graph).vertices.size == s.kernel_degrees.size + int((s.path_lengths - 1).sum())
        assert s.graph.n == int(s.tree_sizes.sum())
        assert np.all(s.path_lengths >= 1)


def test_path_lengths_mean():
    th = solve_theta(2.0)
    L = np.concatenate([sample_anatomy(1000, 2.0, replica_rng(2, r), return_parts=True).path_lengths
                        for r in range(50)])
    assert abs(L.mean() - 1 / (1 - th)) < 3 * L.std(ddof=1) / math.sqrt(L.size)


def test_large_lambda_core_equals_kernel():
    ratios = []
    for r in range(10):
        st_ = giant_statistics(sample_anatomy(400, 10.0, replica_rng(1, r)), whole=True)
        ratios.append(st_["core_size"] / st_["kernel_size"])
    assert abs(np.mean(ratios) - 1) < 0.01


def test_compare_self_and_domain():
    n = 300

    def er(rng):
        return giant_statistics(sample_er_graph(n, 2 / n, rng))

    rep = compare_anatomy_vs_er(n, 2.0, 30, 5, sampler_a=er, sampler_b=er)
    for k in STAT_NAMES:
        se = math.hypot(rep.se_er[k], rep.se_anatomy[k])
        assert abs(rep.mean_er[k] - rep.mean_anatomy[k]) <= 4 * se + 1e-12
    with pytest.raises(ValueError):
        compare_anatomy_vs_er(n, 1.0, 30, 5)
    with pytest.raises(ValueError):
        compare_anatomy_vs_er(n, 2.0, 10, 5)
    assert set(rep.rel_gap) == set(STAT_NAMES)

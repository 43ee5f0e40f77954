"""Configuration model and the three-step contiguous model of the giant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .structure import (
    Graph,
    components_and_giant,
    decoration_stats,
    kernel_decomposition,
)

RESIDUAL = 1e-12


def solve_theta(lam: float) -> float:
    """The root in [0, 1] of theta e^-theta = lam e^-lam (theta = lam if lam <= 1)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam <= 1:
        return float(lam)
    target = lam * math.exp(-lam)
    lo, hi = 0.0, 1.0
    # theta e^-theta is increasing on [0, 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    theta = 0.5 * (lo + hi)
    assert abs(theta * math.exp(-theta) - target) < RESIDUAL
    return theta


def giant_fraction(lam: float) -> float:
    """Asymptotic giant fraction 1 - theta/lam (0 for lam <= 1)."""
    if lam <= 1:
        return 0.0
    return 1.0 - solve_theta(lam) / lam


@dataclass(frozen=True)
class AnatomyParams:
    n: int
    lam: float
    theta: float = field(init=False)

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError(f"contiguous model needs lambda > 1, got {self.lam}")
        object.__setattr__(self, "theta", solve_theta(self.lam))

    @property
    def chi(self) -> float:
        return self.lam - self.theta


@dataclass(frozen=True)
class DegreeSequence:
    d: tuple

    def __init__(self, d):
        arr = tuple(int(x) for x in d)
        if any(x < 0 for x in arr):
            raise ValueError("degrees must be nonnegative")
        object.__setattr__(self, "d", arr)

    @property
    def M(self) -> int:
        return sum(self.d)

    @property
    def N2(self) -> int:
        return sum(x * (x - 1) for x in self.d)

    def __len__(self):
        return len(self.d)


# --- configuration model -------------------------------------------------------
def sample_configuration_model(d, rng) -> Graph:
    """Uniform perfect matching of half-edges; loops and parallel edges kept."""
    seq = d if isinstance(d, DegreeSequence) else DegreeSequence(d)
    if seq.M % 2:
        raise ValueError(f"degree sum {seq.M} is odd")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    stubs = np.repeat(np.arange(len(seq), dtype=np.int64), seq.d)
    rng.shuffle(stubs)
    return Graph(max(len(seq), 1), stubs.reshape(-1, 2))


def exact_simplicity(d) -> float:
    """P(configuration multigraph is simple) by enumerating every matching.

    Meant for tiny sequences (a dozen half-edges gives 10395 matchings).
    """
    seq = d if isinstance(d, DegreeSequence) else DegreeSequence(d)
    if seq.M % 2:
        raise ValueError("odd degree sum")
    stubs = np.repeat(np.arange(len(seq)), seq.d).tolist()
    total = 0
    simple = 0

    def rec(free, pairs):
        nonlocal total, simple
        if not free:
            total += 1
            if all(a != b for a, b in pairs) and len({(min(a, b), max(a, b)) for a, b in pairs}) == len(pairs):
                simple += 1
            return
        a = free[0]
        for i in range(1, len(free)):
            rest = free[1:i] + free[i + 1:]
            rec(rest, pairs + [(stubs[a], stubs[free[i]])])

    rec(list(range(len(stubs))), [])
    return simple / total


@dataclass
class SimplicityBound:
    value: float
    precondition_ok: bool          # max d <= M^(1/4)
    omits_error_term: bool = True  # the O(M^(-1/4)) correction is dropped


def simplicity_lower_bound(d, strict: bool = True) -> SimplicityBound:
    """exp(-N2/(2M) - N2^2/(4M^2) - N2^2/(2M^3)), the leading-order lower
    bound on the probability that the configuration model is simple.

    With ``strict`` a violated degree condition raises; otherwise the value is
    returned with ``precondition_ok=False``.
    """
    seq = d if isinstance(d, DegreeSequence) else DegreeSequence(d)
    M, N2 = seq.M, seq.N2
    if M == 0:
        return SimplicityBound(1.0, True)
    ok = max(seq.d) <= M ** 0.25
    if strict and not ok:
        raise ValueError(f"max degree {max(seq.d)} exceeds M^(1/4) = {M ** 0.25:.4g}")
    val = math.exp(-N2 / (2 * M) - N2**2 / (4 * M**2) - N2**2 / (2 * M**3))
    return SimplicityBound(val, ok)


# --- contiguous model ----------------------------------------------------------------
@dataclass
class AnatomySample:
    graph: Graph
    kernel_degrees: np.ndarray     # degrees of the kernel vertices (loops count 2)
    kernel_edges: np.ndarray       # kernel multigraph on labels 0..k-1
    path_lengths: np.ndarray       # edges per expanded kernel edge
    tree_sizes: np.ndarray         # PGW tree size (root included) per core vertex
    resamples: int


def _hang_trees(core_n: int, theta: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Root a Poisson(theta) GW tree at each of ``core_n`` vertices.

    Generations are grown for all trees at once; new vertices are labelled
    from ``core_n`` upwards.  Returns (edges, tree size per root).
    """
    parents = np.arange(core_n, dtype=np.int64)
    roots = parents.copy()
    sizes = np.ones(core_n, np.int64)
    nxt = core_n
    chunks = []
    while parents.size:
        kids = rng.poisson(theta, size=parents.size)
        total = int(kids.sum())
        if total == 0:
            break
        child = np.arange(nxt, nxt + total, dtype=np.int64)
        nxt += total
        chunks.append(np.stack([np.repeat(parents, kids), child], axis=1))
        roots = np.repeat(roots, kids)
        np.add.at(sizes, roots, 1)
        parents = child
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), np.int64)
    return edges, sizes


def sample_anatomy(n: int, lam: float, rng, max_tries: int = 10_000,
                   return_parts: bool = False):
    """Sample the contiguous model of the giant of ER(n, lam/n).

    1. X ~ Normal(chi, 1/n) and D_i ~ Po(max(X, 0)), redrawn together until
       the degree-at-least-3 entries have even sum; the kernel is a
       configuration multigraph on those entries.
    2. Each kernel edge becomes a path with Geometric(1 - theta) edges.
    3. A Poisson(theta) Galton-Watson tree is rooted at every core vertex.
    """
    ap = AnatomyParams(n, lam)
    theta, chi = ap.theta, ap.chi
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    for tries in range(1, max_tries + 1):
        x = rng.normal(chi, 1.0 / math.sqrt(n))
        D = rng.poisson(max(x, 0.0), size=n)
        kd = D[D >= 3]
        if kd.size and kd.sum() % 2 == 0:
            break
    else:
        raise RuntimeError(f"no admissible kernel degree sequence after {max_tries} draws "
                           f"(chi={chi:.4g}, n={n})")
    kern = sample_configuration_model(kd, rng)
    ke = kern.edges
    k = kd.size
    lengths = rng.geometric(1.0 - theta, size=ke.shape[0]).astype(np.int64)
    n_internal = int((lengths - 1).sum())
    core_n = k + n_internal
    # path expansion: internal vertices are numbered after the kernel vertices
    edges = []
    nxt = k
    for (a, b), L in zip(ke.tolist(), lengths.tolist()):
        if L == 1:
            edges.append((a, b))
            continue
        chain = [a] + list(range(nxt, nxt + L - 1)) + [b]
        nxt += L - 1
        edges.extend(zip(chain[:-1], chain[1:]))
    core_edges = np.array(edges, np.int64).reshape(-1, 2)
    tree_edges, sizes = _hang_trees(core_n, theta, rng)
    g = Graph(int(sizes.sum()), np.concatenate([core_edges, tree_edges]))
    if return_parts:
        return AnatomySample(g, kd.astype(np.int64), ke, lengths, sizes, tries - 1)
    return g


# --- comparison with direct ER sampling ------------------------------------------
STAT_NAMES = ("giant_size", "core_size", "kernel_size", "deg1_count", "max_decoration")


def giant_statistics(g: Graph, whole: bool = False) -> dict:
    """Isomorphism-invariant summary of the giant of ``g`` (or all of ``g``)."""
    if whole:
        sub = g
    else:
        sub = g.subgraph(components_and_giant(g).giant_vertices)
    dec = kernel_decomposition(sub)
    _, dmax = decoration_stats(sub) if dec.kernel.m else (None, 0)
    deg = sub.degrees[sub.vertices]
    return {
        "giant_size": int(sub.vertices.size),
        "core_size": int(dec.core.vertices.size),
        "kernel_size": int(dec.kernel.vertices.size),
        "deg1_count": int(np.count_nonzero(deg == 1)),
        "max_decoration": int(dmax),
    }


def sample_er_graph(n: int, p: float, rng) -> Graph:
    """G(n, p) as an edge list: Binomial edge count, then a uniform subset."""
    from .sim.environment import pairs_from_index

    N = n * (n - 1) // 2
    k = int(rng.binomial(N, p))
    i, j = pairs_from_index(rng.choice(N, size=k, replace=False), n)
    return Graph(n, np.stack([i, j], axis=1))


@dataclass
class ComparisonReport:
    n: int
    lam: float
    replicas: int
    seed: int
    mean_er: dict
    se_er: dict
    mean_anatomy: dict
    se_anatomy: dict
    rel_gap: dict
    quantiles_er: dict
    quantiles_anatomy: dict
    per_replica: dict = field(repr=False, default_factory=dict)

    def to_json(self, **kw) -> str:
        import json
        from dataclasses import asdict

        d = asdict(self)
        d.pop("per_replica")
        return json.dumps(d, **kw)

    def to_csv(self) -> str:
        """Per-replica statistics, one row per (sampler, replica)."""
        rows = ["sampler,replica," + ",".join(STAT_NAMES)]
        for name in ("er", "anatomy"):
            cols = self.per_replica.get(name, {})
            for r in range(len(cols.get(STAT_NAMES[0], []))):
                rows.append(f"{name},{r}," + ",".join(str(cols[k][r]) for k in STAT_NAMES))
        return "\n".join(rows) + "\n"


def compare_anatomy_vs_er(n: int, lam: float, replicas: int, seed: int,
                          sampler_a=None, sampler_b=None) -> ComparisonReport:
    """Mean/quantile gaps of the giant statistics between direct ER giants
    and contiguous-model samples.  Either sampler can be swapped out
    (``sampler(rng) -> stats dict``) for self-comparison checks."""
    from .seeding import replica_rng

    if not lam > 1:
        raise ValueError(f"comparison needs lambda > 1, got {lam}")
    if replicas < 30:
        raise ValueError("need at least 30 replicas")
    p = lam / n
    if sampler_a is None:
        def sampler_a(rng):
            return giant_statistics(sample_er_graph(n, p, rng))
    if sampler_b is None:
        def sampler_b(rng):
            return giant_statistics(sample_anatomy(n, lam, rng), whole=True)
    a = {k: [] for k in STAT_NAMES}
    b = {k: [] for k in STAT_NAMES}
    for r in range(replicas):
        sa = sampler_a(replica_rng(seed, r, 0))
        sb = sampler_b(replica_rng(seed, r, 1))
        for k in STAT_NAMES:
            a[k].append(sa[k])
            b[k].append(sb[k])
    qs = (0.1, 0.5, 0.9)
    out = dict(mean_er={}, se_er={}, mean_anatomy={}, se_anatomy={}, rel_gap={},
               quantiles_er={}, quantiles_anatomy={})
    for k in STAT_NAMES:
        xa = np.asarray(a[k], float)
        xb = np.asarray(b[k], float)
        out["mean_er"][k] = float(xa.mean())
        out["se_er"][k] = float(xa.std(ddof=1) / math.sqrt(xa.size))
        out["mean_anatomy"][k] = float(xb.mean())
        out["se_anatomy"][k] = float(xb.std(ddof=1) / math.sqrt(xb.size))
        denom = xa.mean() if xa.mean() != 0 else 1.0
        out["rel_gap"][k] = float(abs(xb.mean() - xa.mean()) / denom)
        out["quantiles_er"][k] = np.quantile(xa, qs).tolist()
        out["quantiles_anatomy"][k] = np.quantile(xb, qs).tolist()
    return ComparisonReport(n, float(lam), replicas, seed, per_replica={"er": a, "anatomy": b}, **out)

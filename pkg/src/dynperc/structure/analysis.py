"""Giant, removal edges, 2-core, kernel, decorations, and expansion constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .graph import Graph

EXACT_PHI_MAX = 20


def _active(g: Graph) -> np.ndarray:
    mask = np.zeros(g.n, np.bool_)
    mask[g.vertices] = True
    return mask


# --- components -----------------------------------------------------------------
@dataclass
class Components:
    labels: np.ndarray          # component id per vertex, -1 outside the vertex set
    sizes: np.ndarray
    giant: int                  # id of the giant component

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    @property
    def giant_vertices(self) -> np.ndarray:
        return self.members(self.giant)

    def as_list(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        lab = self.labels[order]
        keep = lab >= 0
        return np.split(order[keep], np.flatnonzero(np.diff(lab[keep])) + 1)


def components_and_giant(g: Graph) -> Components:
    """Connected components numbered by smallest member; giant = largest,
    ties broken towards the component holding the smallest label."""
    if g.n <= 0 or g.vertices.size == 0:
        raise ValueError("empty graph has no components")
    e = g.edges
    a = sp.coo_matrix((np.ones(g.m), (e[:, 0], e[:, 1])), shape=(g.n, g.n)).tocsr()
    _, raw = connected_components(a, directed=False)
    active = _active(g)
    raw = np.where(active, raw, -1)
    # renumber by smallest member
    first = {}
    for v in g.vertices.tolist():
        r = raw[v]
        if r not in first:
            first[r] = len(first)
    lut = np.full(raw.max() + 2, -1, np.int64)
    for r, c in first.items():
        lut[r] = c
    labels = np.where(raw >= 0, lut[raw], -1)
    sizes = np.bincount(labels[labels >= 0], minlength=len(first)).astype(np.int64)
    giant = int(np.argmax(sizes))     # argmax returns the first maximiser
    return Components(labels, sizes, giant)


# --- removal edges ---------------------------------------------------------------
def removal_edge_counts(g: Graph) -> np.ndarray:
    """R(x): bridges of x's component whose removal puts x on the smaller side.

    On equal halves the side containing the component's smallest label is the
    larger one.  Vertices outside ``g.vertices`` get 0.
    """
    indptr, nbr, eid = g.csr
    return K.removal_counts_kernel(g.n, indptr, nbr, eid, _active(g))


def removal_edge_counts_bruteforce(g: Graph) -> np.ndarray:
    """Reference implementation: delete each edge and recount components."""
    comp = components_and_giant(g)
    out = np.zeros(g.n, np.int64)
    for k in range(g.m):
        u, v = g.edges[k]
        if u == v:
            continue
        rest = Graph(g.n, np.delete(g.edges, k, axis=0), vertices=g.vertices)
        c2 = components_and_giant(rest)
        if c2.labels[u] == c2.labels[v]:
            continue
        side_u = c2.members(c2.labels[u])
        side_v = c2.members(c2.labels[v])
        if side_u.size != side_v.size:
            small = side_u if side_u.size < side_v.size else side_v
        else:
            small = side_v if side_u.min() < side_v.min() else side_u
        out[small] += 1
    del comp
    return out


# --- core / kernel -----------------------------------------------------------------
def core_of(g: Graph) -> Graph:
    """2-core: recursively delete vertices of degree below 2."""
    indptr, nbr, _ = g.csr
    alive = K.core_mask_kernel(g.n, indptr, nbr, _active(g))
    return g.subgraph(np.flatnonzero(alive))


@dataclass
class KernelDecomposition:
    kernel: Graph                   # multigraph on the degree>=3 core vertices
    paths: list                     # internal core vertices of each kernel edge
    core: Graph

    @property
    def loops(self) -> int:
        e = self.kernel.edges
        return int(np.count_nonzero(e[:, 0] == e[:, 1]))

    def edge_multiset(self) -> list[tuple[int, int]]:
        e = np.sort(self.kernel.edges, axis=1)
        return sorted(map(tuple, e.tolist()))


def kernel_decomposition(g: Graph) -> KernelDecomposition:
    core = core_of(g)
    deg = core.degrees
    indptr, nbr, eid = core.csr
    kverts = core.vertices[deg[core.vertices] >= 3]
    is_k = np.zeros(g.n, bool)
    is_k[kverts] = True
    used = np.zeros(core.m, bool)
    kedges, paths = [], []
    for s in kverts.tolist():
        for j in range(indptr[s], indptr[s + 1]):
            e = eid[j]
            if used[e]:
                continue
            used[e] = True
            prev, cur = s, nbr[j]
            internal = []
            while not is_k[cur]:
                internal.append(cur)
                # degree-2 vertex: leave by its other, unused edge
                a, b = indptr[cur], indptr[cur + 1]
                nxt = -1
                for jj in range(a, b):
                    if not used[eid[jj]]:
                        used[eid[jj]] = True
                        nxt = nbr[jj]
                        break
                prev, cur = cur, nxt
            del prev
            kedges.append((s, cur))
            paths.append(np.array(internal, np.int64))
    kernel = Graph(g.n, np.array(kedges, np.int64).reshape(-1, 2), vertices=kverts)
    return KernelDecomposition(kernel, paths, core)


def kernel_of(g: Graph) -> Graph:
    """Contract maximal 2-paths of the core; isolated cycles disappear."""
    return kernel_decomposition(g).kernel


def hung_tree_sizes(g: Graph, core: Graph) -> np.ndarray:
    """For each core vertex, the number of non-core vertices hanging from it."""
    indptr, nbr, _ = g.csr
    in_core = np.zeros(g.n, bool)
    in_core[core.vertices] = True
    owner = np.full(g.n, -1, np.int64)
    owner[core.vertices] = core.vertices
    frontier = core.vertices.tolist()
    while frontier:
        nxt = []
        for u in frontier:
            for v in nbr[indptr[u]:indptr[u + 1]].tolist():
                if owner[v] < 0:
                    owner[v] = owner[u]
                    nxt.append(v)
        frontier = nxt
    hung = owner[(owner >= 0) & ~in_core]
    return np.bincount(hung, minlength=g.n).astype(np.int64)


def decoration_stats(g: Graph) -> tuple[np.ndarray, int]:
    """Per kernel edge: internal path vertices plus the trees hung on them."""
    dec = kernel_decomposition(g)
    if dec.kernel.m == 0:
        return np.zeros(0, np.int64), 0
    hung = hung_tree_sizes(g, dec.core)
    sizes = np.array([p.size + int(hung[p].sum()) for p in dec.paths], np.int64)
    return sizes, int(sizes.max())


# --- expansion -------------------------------------------------------------------
@dataclass
class PhiResult:
    value: float
    lower: float
    upper: float
    method: str                    # "exact" or "cheeger_interval"


def isoperimetric_constant(g: Graph, method: str = "exact") -> PhiResult:
    """Phi of a connected (multi)graph component.

    ``exact`` enumerates all vertex subsets (at most 20 vertices); ``estimate``
    inverts the Cheeger sandwich into the interval [gamma/2, sqrt(2 gamma)].
    """
    h, _ = g.relabelled()
    if h.m == 0:
        raise ValueError("isoperimetric constant needs at least one edge")
    if method == "exact":
        k = g.vertices.size
        if k > EXACT_PHI_MAX:
            raise ValueError(f"exact Phi limited to {EXACT_PHI_MAX} vertices, got {k}")
        w = h.dense_weights()
        np.fill_diagonal(w, 0)
        phi, _ = K.exact_phi_kernel(w, h.degrees[:k].copy(), h.m)
        return PhiResult(float(phi), float(phi), float(phi), "exact")
    if method == "estimate":
        gam = spectral_gap(g)
        return PhiResult(gam / 2, gam / 2, min(1.0, math.sqrt(2 * gam)), "cheeger_interval")
    raise ValueError(f"unknown method {method!r}")


@dataclass
class GapResult:
    gamma: float
    residual: float
    iterations: int
    converged: bool
    method: str


def _normalised_adjacency(g: Graph):
    h, _ = g.relabelled()
    e = h.edges
    k = g.vertices.size
    a = sp.coo_matrix((np.ones(h.m), (e[:, 0], e[:, 1])), shape=(k, k))
    a = (a + a.T).tocsr()        # a loop lands twice on the diagonal: degree 2
    d = np.asarray(a.sum(axis=1)).ravel()
    if np.any(d == 0):
        raise ValueError("spectral gap needs a connected component without isolated vertices")
    s = sp.diags(d ** -0.5)
    return (s @ a @ s).tocsr(), d


def spectral_gap(g: Graph, method: str = "power", tol: float = 1e-9, max_iter: int = 100_000,
                 return_info: bool = False, seed: int = 0):
    """gamma = 1 - lambda_2 of the simple random walk on a connected component.

    ``power`` iterates the lazy chain (I + P)/2 in its symmetric form with the
    Perron vector sqrt(d) projected out, so the iteration converges to
    (1 + lambda_2)/2 regardless of negative eigenvalues.  ``lanczos`` uses
    scipy's ARPACK; ``dense`` a full eigendecomposition.
    """
    if g.vertices.size == 1:
        raise ValueError("spectral gap undefined for a single vertex")
    sym, d = _normalised_adjacency(g)
    k = d.size
    if method == "dense" or k <= 3:
        ev = np.linalg.eigvalsh(sym.toarray())
        res = GapResult(float(1 - ev[-2]), 0.0, 0, True, "dense")
    elif method == "lanczos":
        from scipy.sparse.linalg import eigsh

        v0 = np.random.default_rng(seed).standard_normal(k)
        ev = eigsh(sym, k=2, which="LA", v0=v0, tol=tol, return_eigenvectors=False)
        res = GapResult(float(1 - np.sort(ev)[0]), 0.0, 0, True, "lanczos")
    elif method == "power":
        top = np.sqrt(d) / math.sqrt(d.sum())
        x = np.random.default_rng(seed).standard_normal(k)
        x -= (x @ top) * top
        x /= np.linalg.norm(x)
        lam_old = np.inf
        lam = 0.0
        resid = np.inf
        it = 0
        converged = False
        for it in range(1, max_iter + 1):
            y = 0.5 * (x + sym @ x)
            y -= (y @ top) * top
            lam = float(x @ y)
            nrm = np.linalg.norm(y)
            if nrm == 0.0:
                lam, resid, converged = 0.0, 0.0, True
                break
            if abs(lam - lam_old) < tol:
                resid = float(np.linalg.norm(y - lam * x))
                converged = True
                x = y / nrm
                break
            lam_old = lam
            x = y / nrm
        if not converged:
            resid = float(np.linalg.norm(0.5 * (x + sym @ x) - lam * x))
        res = GapResult(2.0 * (1.0 - lam), resid, it, converged, "power")
    else:
        raise ValueError(f"unknown method {method!r}")
    return res if return_info else res.gamma


# --- good graphs -----------------------------------------------------------------
def iterated_log(n: float, depth: int) -> float:
    x = float(n)
    for _ in range(depth):
        if x <= 0:
            return -math.inf
        x = math.log(x)
    return x


@dataclass(frozen=True)
class GoodGraphConstants:
    c_star: float = 0.05
    C_star: float = 20.0
    omega_star: int | None = None      # None: max M with log_(M) n >= 1

    def __post_init__(self):
        if not 0 < self.c_star <= self.C_star:
            raise ValueError("need 0 < c_star <= C_star")

    def omega(self, n: int) -> int:
        if self.omega_star is not None:
            return int(self.omega_star)
        m = 0
        while iterated_log(n, m + 1) >= 1:
            m += 1
        return m


def far_from_core_profile(g: Graph, constants: GoodGraphConstants = GoodGraphConstants(),
                          depths=None, removal=None, giant=None) -> dict[int, float]:
    """Fraction of giant vertices with R(x) > C* log_(M) n, for each depth M."""
    n = g.n
    top = constants.omega(n)
    depths = range(1, top + 1) if depths is None else depths
    if removal is None:
        removal = removal_edge_counts(g)
    if giant is None:
        giant = components_and_giant(g).giant_vertices
    out = {}
    for m in depths:
        lm = iterated_log(n, m)
        if lm < 1:
            raise ValueError(f"log_({m}) n = {lm:.4g} < 1; depth {m} not allowed")
        out[int(m)] = float(np.mean(removal[giant] > constants.C_star * lm)) if giant.size else 0.0
    return out


CLAUSES = ("unique_giant", "size", "max_degree", "num_edges", "deg1_in_giant",
           "removal_edges", "far_from_core", "expansion")


@dataclass
class StructureReport:
    n: int
    giant_vertices: list
    giant_size: int
    degree_histogram: list
    deg1_in_giant: int
    removal_counts: list
    core_size: int
    kernel_size: int
    kernel_edge_multiset: list
    kernel_loops: int
    max_decoration: int
    far_profile: dict
    phi: dict
    gamma: float
    good: dict

    def to_json(self, **kw) -> str:
        import json
        from dataclasses import asdict

        d = asdict(self)
        d["far_profile"] = {str(k): v for k, v in self.far_profile.items()}
        return json.dumps(d, **kw)

    @classmethod
    def from_json(cls, text: str) -> "StructureReport":
        import json

        d = json.loads(text)
        d["far_profile"] = {int(k): v for k, v in d["far_profile"].items()}
        d["kernel_edge_multiset"] = [tuple(e) for e in d["kernel_edge_multiset"]]
        return cls(**d)


def good_graph_check(g: Graph, constants: GoodGraphConstants = GoodGraphConstants(),
                     with_isolated_clause: bool = False, gap_method: str = "power",
                     details: bool = False):
    """Per-clause verdicts of the good-graph definition.

    Phi is computed exactly for giants of at most 20 vertices; otherwise the
    Phi clause uses the lower end gamma/2 of the Cheeger interval.
    """
    n = g.n
    c, C = constants.c_star, constants.C_star
    logn = math.log(n)
    v = dict.fromkeys(CLAUSES, False)
    if with_isolated_clause:
        v["isolated"] = bool(np.count_nonzero(g.degrees[g.vertices] == 0) >= c * n)
    info = {}
    comp = components_and_giant(g)
    big = np.flatnonzero(comp.sizes >= C * logn)
    if big.size != 1:
        v["good"] = False
        return (v, info) if details else v
    gv = comp.members(int(big[0]))
    v["unique_giant"] = True
    deg = g.degrees
    in_g = np.zeros(n, bool)
    in_g[gv] = True
    g_edges = int(np.count_nonzero(in_g[g.edges[:, 0]])) if g.m else 0
    v["size"] = gv.size >= c * n
    v["max_degree"] = int(deg[gv].max()) <= C * logn
    v["num_edges"] = g_edges <= C * n
    v["deg1_in_giant"] = int(np.count_nonzero(deg[gv] == 1)) >= c * n
    removal = removal_edge_counts(g)
    v["removal_edges"] = int(removal[gv].max()) <= C * logn
    top = constants.omega(n)
    prof = far_from_core_profile(g, constants, range(2, top + 1), removal, gv) if top >= 2 else {}
    v["far_from_core"] = all(frac <= iterated_log(n, m - 1) ** -4 for m, frac in prof.items())
    sub = g.subgraph(gv)
    if gv.size >= 2:
        gam = spectral_gap(sub, method=gap_method)
        phi = isoperimetric_constant(sub, "exact") if gv.size <= EXACT_PHI_MAX else \
            PhiResult(gam / 2, gam / 2, min(1.0, math.sqrt(2 * gam)), "cheeger_interval")
        v["expansion"] = phi.lower >= c * logn ** -2 and gam >= c * logn ** -4
    else:
        gam, phi = 0.0, PhiResult(0.0, 0.0, 0.0, "exact")
    v = {k: bool(b) for k, b in v.items()}
    v["good"] = all(v.values())
    info = dict(components=comp, giant=gv, removal=removal, profile=prof, gamma=gam, phi=phi)
    return (v, info) if details else v


def structure_report(g: Graph, constants: GoodGraphConstants = GoodGraphConstants(),
                     with_isolated_clause: bool = False) -> StructureReport:
    verdict, info = good_graph_check(g, constants, with_isolated_clause, details=True)
    comp = info.get("components") or components_and_giant(g)
    gv = info["giant"] if "giant" in info else comp.giant_vertices
    removal = info["removal"] if "removal" in info else removal_edge_counts(g)
    deg = g.degrees
    sub = g.subgraph(gv)
    dec = kernel_decomposition(sub)
    _, dmax = decoration_stats(sub) if dec.kernel.m else (None, 0)
    if "gamma" in info:
        gam, phi = info["gamma"], info["phi"]
    elif gv.size >= 2:
        gam = spectral_gap(sub)
        phi = isoperimetric_constant(sub, "exact" if gv.size <= EXACT_PHI_MAX else "estimate")
    else:
        gam, phi = 0.0, PhiResult(0.0, 0.0, 0.0, "exact")
    top = constants.omega(g.n)
    prof = far_from_core_profile(g, constants, range(1, top + 1), removal, gv) if top >= 1 else {}
    r = np.zeros(g.n, np.int64)
    r[gv] = removal[gv]
    return StructureReport(
        n=g.n,
        giant_vertices=gv.tolist(),
        giant_size=int(gv.size),
        degree_histogram=np.bincount(deg[g.vertices]).tolist(),
        deg1_in_giant=int(np.count_nonzero(deg[gv] == 1)),
        removal_counts=r.tolist(),
        core_size=int(dec.core.vertices.size),
        kernel_size=int(dec.kernel.vertices.size),
        kernel_edge_multiset=dec.edge_multiset(),
        kernel_loops=dec.loops,
        max_decoration=int(dmax),
        far_profile=prof,
        phi={"value": phi.value, "lower": phi.lower, "upper": phi.upper, "method": phi.method},
        gamma=float(gam),
        good=verdict,
    )

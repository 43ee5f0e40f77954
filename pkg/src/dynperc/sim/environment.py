"""The open-edge environment on K_n and its initial laws.

Vertices are labelled ``0 .. n-1`` throughout the package (label 0 plays the
role of "vertex 1" in the usual 1-based notation; every smallest-label rule is
unaffected by the shift).
"""

from __future__ import annotations

import os

import numpy as np

from ..params import Params

DEBUG = os.environ.get("DYNPERC_DEBUG", "0") not in ("", "0")

MODES = ("stationary", "all_open", "all_closed", "explicit")


def pair_offsets(n: int) -> np.ndarray:
    i = np.arange(n, dtype=np.int64)
    return i * (2 * n - i - 1) // 2


def pairs_from_index(idx, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices of the upper triangle (row-major, i<j) to pairs."""
    idx = np.asarray(idx, dtype=np.int64)
    off = pair_offsets(n)
    i = np.searchsorted(off, idx, side="right") - 1
    j = idx - off[i] + i + 1
    return i, j


def index_from_pairs(i, j, n: int) -> np.ndarray:
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    return pair_offsets(n)[lo] + (hi - lo - 1)


class Environment:
    """Symmetric open-edge state with incremental degree/isolation counters."""

    def __init__(self, n: int, adj: np.ndarray | None = None, clock: float = 0.0):
        self.n = int(n)
        if adj is None:
            adj = np.zeros((n, n), dtype=np.uint8)
        self.adj = np.ascontiguousarray(adj, dtype=np.uint8)
        self.deg = self.adj.sum(axis=1).astype(np.int64)
        self.counts = np.array(
            [int(self.deg.sum()) // 2, int(np.count_nonzero(self.deg == 0))], dtype=np.int64
        )
        self.clock = float(clock)

    # --- views -------------------------------------------------------------
    @property
    def open_count(self) -> int:
        return int(self.counts[0])

    @property
    def isolated_count(self) -> int:
        return int(self.counts[1])

    @property
    def open_edges(self) -> set[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adj, 1))
        return set(zip(i.tolist(), j.tolist()))

    def neighbours(self, v: int) -> set[int]:
        return set(np.flatnonzero(self.adj[v]).tolist())

    @property
    def adjacency(self) -> list[set[int]]:
        return [self.neighbours(v) for v in range(self.n)]

    def edge_array(self) -> np.ndarray:
        i, j = np.nonzero(np.triu(self.adj, 1))
        return np.stack([i, j], axis=1).astype(np.int64)

    def bitmask(self) -> int:
        """Open edges as an integer over the lexicographic edge order."""
        if self.n * (self.n - 1) // 2 > 62:
            raise ValueError("bitmask only defined for N <= 62 edges")
        i, j = np.triu_indices(self.n, 1)
        bits = self.adj[i, j].astype(np.int64)
        return int((bits << np.arange(bits.size, dtype=np.int64)).sum())

    def snapshot(self):
        from ..structure.graph import Graph

        return Graph(self.n, self.edge_array())

    def copy(self) -> "Environment":
        env = Environment.__new__(Environment)
        env.n = self.n
        env.adj = self.adj.copy()
        env.deg = self.deg.copy()
        env.counts = self.counts.copy()
        env.clock = self.clock
        return env

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.adj, other.adj)

    def check(self) -> None:
        """Assert the counter and symmetry invariants."""
        a = self.adj
        if not np.array_equal(a, a.T):
            raise AssertionError("adjacency not symmetric")
        if np.any(np.diag(a)):
            raise AssertionError("self-pair open")
        deg = a.sum(axis=1)
        if not np.array_equal(deg, self.deg):
            raise AssertionError("degree vector out of sync")
        if self.counts[0] != deg.sum() // 2:
            raise AssertionError("open_count out of sync")
        if self.counts[1] != np.count_nonzero(deg == 0):
            raise AssertionError("isolated_count out of sync")


def _validate_pairs(n: int, edges) -> np.ndarray:
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    arr = arr.reshape(-1, 2)
    for u, v in arr.tolist():
        if u == v or not (0 <= u < n) or not (0 <= v < n):
            raise ValueError(f"invalid vertex pair {(u, v)} for n={n}")
    return arr


def init_environment(params: Params, mode: str = "stationary", rng=None, edges=None) -> Environment:
    """Build the time-0 environment.

    ``stationary`` opens each of the N edges independently with probability
    ``p`` (drawn as a Binomial count plus a uniform subset); ``explicit``
    takes an iterable of vertex pairs.
    """
    n = params.n
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    adj = np.zeros((n, n), dtype=np.uint8)
    if mode == "all_open":
        adj[:] = 1
        np.fill_diagonal(adj, 0)
    elif mode == "stationary":
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        N = params.N
        k = int(rng.binomial(N, params.p))
        idx = rng.choice(N, size=k, replace=False) if k else np.empty(0, np.int64)
        i, j = pairs_from_index(idx, n)
        adj[i, j] = 1
        adj[j, i] = 1
    elif mode == "explicit":
        arr = _validate_pairs(n, edges if edges is not None else [])
        adj[arr[:, 0], arr[:, 1]] = 1
        adj[arr[:, 1], arr[:, 0]] = 1
    env = Environment(n, adj)
    if DEBUG:
        env.check()
    return env

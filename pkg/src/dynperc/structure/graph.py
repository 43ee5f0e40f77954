"""Immutable (multi)graph snapshots with CSR adjacency carrying edge ids."""

from __future__ import annotations

from functools import cached_property

import numpy as np


class Graph:
    """Undirected multigraph on labels ``0..n-1``.

    ``edges`` is an ``(m, 2)`` integer array; loops and parallel edges are
    allowed and a loop adds 2 to its vertex's degree.  ``vertices`` records
    the vertex set of a subgraph (all labels by default); edges must stay
    inside it.
    """

    def __init__(self, n: int, edges=None, vertices=None):
        n = int(n)
        if n <= 0:
            raise ValueError("graph must have at least one vertex")
        self.n = n
        e = np.zeros((0, 2), np.int64) if edges is None else np.asarray(edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            bad = e[(e < 0).any(1) | (e >= n).any(1)][0]
            raise ValueError(f"edge {tuple(bad.tolist())} out of range for n={n}")
        self.edges = e
        self.edges.setflags(write=False)
        if vertices is None:
            self.vertices = np.arange(n, dtype=np.int64)
        else:
            self.vertices = np.unique(np.asarray(vertices, dtype=np.int64))
        self.vertices.setflags(write=False)

    @classmethod
    def from_pairs(cls, n, pairs):
        return cls(n, np.array(list(pairs), dtype=np.int64).reshape(-1, 2))

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def csr(self):
        """``(indptr, nbr, eid)``: neighbour lists with the id of each edge.

        A loop appears twice in its vertex's list (once per half-edge).
        """
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(self.n + 1, np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)

    def neighbours(self, v: int) -> np.ndarray:
        indptr, nbr, _ = self.csr
        return nbr[indptr[v]:indptr[v + 1]]

    def subgraph(self, verts) -> "Graph":
        """Induced subgraph keeping the original labels."""
        verts = np.unique(np.asarray(verts, dtype=np.int64))
        mask = np.zeros(self.n, bool)
        mask[verts] = True
        keep = mask[self.edges[:, 0]] & mask[self.edges[:, 1]] if self.m else np.zeros(0, bool)
        return Graph(self.n, self.edges[keep], vertices=verts)

    def relabelled(self) -> tuple["Graph", np.ndarray]:
        """Compact copy on ``0..k-1`` together with the old labels."""
        verts = self.vertices
        idx = np.full(self.n, -1, np.int64)
        idx[verts] = np.arange(verts.size)
        return Graph(max(int(verts.size), 1), idx[self.edges]), verts

    def dense_weights(self) -> np.ndarray:
        """Multiplicity matrix of a relabelled graph; loops on the diagonal."""
        k = self.n
        w = np.zeros((k, k), np.int64)
        np.add.at(w, (self.edges[:, 0], self.edges[:, 1]), 1)
        off = w - np.diag(np.diag(w))
        return off + off.T + np.diag(np.diag(w))

    def simple(self) -> bool:
        e = self.edges
        if np.any(e[:, 0] == e[:, 1]):
            return False
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        return np.unique(lo * self.n + hi).size == self.m

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, |V|={self.vertices.size})"

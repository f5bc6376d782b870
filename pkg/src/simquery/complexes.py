"""Coauthorship simplicial complexes: registries, cochains, Laplacians.

Every paper's author set becomes a top simplex; closure under faces is
completed downward. The cochain of a simplex is the summed citations of all
papers whose author set contains it. Orientation is induced by the global
lexicographic order of author ids.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import sparse

from .corpus import BipartiteGraph

__all__ = [
    "ComplexError",
    "Simplex",
    "canonical",
    "SimplicialComplex",
    "build_complex",
    "incidence_matrix",
    "hodge_laplacian",
    "normalized_laplacian",
    "exact_query",
    "edge_distance",
    "hop_distances",
    "adjacency_lists",
]

Simplex = tuple[str, ...]

NORM_EPS = 1e-12


class ComplexError(ValueError):
    """Invalid simplex, order, or index."""


def canonical(vertices) -> Simplex:
    """Canonical (lexicographically sorted) form of a vertex collection."""
    vs = tuple(sorted(vertices))
    if len(set(vs)) != len(vs):
        raise ComplexError(f"duplicate vertices in simplex {vertices!r}")
    if not vs:
        raise ComplexError("a simplex needs at least one vertex")
    return vs


@dataclass
class SimplicialComplex:
    """Per-order simplex registries with dense indices and cochain vectors."""

    simplices: list[list[Simplex]] = field(default_factory=list)
    cochains: list[np.ndarray] = field(default_factory=list)
    index: list[dict[Simplex, int]] = field(init=False)

    def __post_init__(self):
        self.index = [{s: i for i, s in enumerate(order)}
                      for order in self.simplices]

    @property
    def max_order(self) -> int:
        return len(self.simplices) - 1

    def counts(self) -> list[int]:
        return [len(order) for order in self.simplices]

    def size(self) -> int:
        return sum(self.counts())

    def contains(self, s: Simplex) -> bool:
        k = len(s) - 1
        return 0 <= k <= self.max_order and s in self.index[k]

    def locate(self, s: Simplex) -> tuple[int, int]:
        """Return (order, index) of a stored simplex."""
        k = len(s) - 1
        if not self.contains(s):
            raise ComplexError(f"simplex {s!r} is not stored")
        return k, self.index[k][s]

    def cochain_of(self, s: Simplex) -> float:
        k, i = self.locate(s)
        return float(self.cochains[k][i])

    def top_simplices(self) -> list[Simplex]:
        """Simplices that are not a face of any stored higher-order simplex."""
        tops = []
        for k, order in enumerate(self.simplices):
            if k + 1 <= self.max_order:
                above = self.index[k + 1]
                covered = set()
                for s in above:
                    for p in range(len(s)):
                        covered.add(s[:p] + s[p + 1:])
                tops.extend(s for s in order if s not in covered)
            else:
                tops.extend(order)
        return tops

    def strict_supersets(self, s: Simplex) -> list[Simplex]:
        sset = set(s)
        out = []
        for k in range(len(s), self.max_order + 1):
            out.extend(m for m in self.simplices[k] if sset.issubset(m))
        return out

    def to_json(self) -> str:
        doc = {
            "simplices": [[list(s) for s in order] for order in self.simplices],
            "cochains": [c.tolist() for c in self.cochains],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SimplicialComplex":
        doc = json.loads(text)
        simplices = [[tuple(s) for s in order] for order in doc["simplices"]]
        cochains = [np.asarray(c, dtype=float) for c in doc["cochains"]]
        return cls(simplices=simplices, cochains=cochains)


def build_complex(g: BipartiteGraph) -> SimplicialComplex:
    """Build the coauthorship complex with citation-sum cochains."""
    acc: list[dict[Simplex, float]] = []
    for paper in g.papers:
        verts = sorted(paper.authors)
        for r in range(1, len(verts) + 1):
            k = r - 1
            while len(acc) <= k:
                acc.append({})
            bucket = acc[k]
            for combo in combinations(verts, r):
                bucket[combo] = bucket.get(combo, 0.0) + paper.citations
    simplices = [sorted(bucket) for bucket in acc]
    cochains = [np.array([bucket[s] for s in order], dtype=float)
                for order, bucket in zip(simplices, acc)]
    return SimplicialComplex(simplices=simplices, cochains=cochains)


def incidence_matrix(s: SimplicialComplex, k: int) -> sparse.csr_matrix:
    """Signed face-incidence matrix B_k: rows (k-1)-simplices, cols k-simplices.

    Column j holds (-1)^p at the face of the j-th k-simplex obtained by
    dropping its p-th vertex (canonical vertex order fixes orientation).
    """
    if not 1 <= k <= s.max_order:
        raise ComplexError(f"incidence order {k} outside [1, {s.max_order}]")
    rows, cols, vals = [], [], []
    faces = s.index[k - 1]
    for j, simplex in enumerate(s.simplices[k]):
        for p in range(len(simplex)):
            face = simplex[:p] + simplex[p + 1:]
            rows.append(faces[face])
            cols.append(j)
            vals.append((-1) ** p)
    shape = (len(s.simplices[k - 1]), len(s.simplices[k]))
    return sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=shape)


def hodge_laplacian(s: SimplicialComplex, k: int) -> sparse.csr_matrix:
    """L_k = B_k^T B_k + B_{k+1} B_{k+1}^T, boundary orders use zero maps."""
    if not 0 <= k <= s.max_order:
        raise ComplexError(f"laplacian order {k} outside [0, {s.max_order}]")
    n = len(s.simplices[k])
    L = sparse.csr_matrix((n, n), dtype=float)
    if k >= 1:
        B = incidence_matrix(s, k).astype(float)
        L = L + B.T @ B
    if k + 1 <= s.max_order:
        B = incidence_matrix(s, k + 1).astype(float)
        L = L + B @ B.T
    L.eliminate_zeros()
    return L


def normalized_laplacian(L: sparse.spmatrix) -> sparse.csr_matrix:
    """Symmetric degree normalization: L_ij / sqrt(max(L_ii,eps) max(L_jj,eps))."""
    L = sparse.csr_matrix(L, dtype=float)
    d = np.asarray(L.diagonal(), dtype=float)
    scale = 1.0 / np.sqrt(np.maximum(d, NORM_EPS))
    D = sparse.diags(scale)
    N = sparse.csr_matrix(D @ L @ D)
    N.setdiag(np.where(d > 0, 1.0, 0.0))
    N.eliminate_zeros()
    return N


def exact_query(s: SimplicialComplex, g: BipartiteGraph, q) -> float:
    """Ground-truth cochain of q, cross-checked two independent ways.

    (a) direct sum of citations of papers whose author set contains q;
    (b) the inclusion-exclusion expansion over stored strict supersets plus
    the independent citation of q itself. A disagreement means the complex is
    inconsistent with the graph, so it raises.
    """
    q = canonical(q)
    for v in q:
        if (v,) not in s.index[0]:
            raise ComplexError(f"unknown vertex {v!r} in query")
    qset = set(q)
    direct = sum(p.citations for p in g.papers if qset.issubset(p.author_set))
    independent = sum(p.citations for p in g.papers if p.author_set == qset)

    k = len(q) - 1
    expansion = float(independent)
    for ell in range(k + 1, s.max_order + 1):
        sign = (-1) ** (ell - k + 1)
        total = sum(float(s.cochains[ell][i])
                    for i, m in enumerate(s.simplices[ell])
                    if qset.issubset(m))
        expansion += sign * total
    if not math.isclose(direct, expansion, rel_tol=0.0, abs_tol=1e-9):
        raise ComplexError(
            f"query decomposition mismatch for {q!r}: {direct} vs {expansion}")
    return float(direct)


def adjacency_lists(L: sparse.spmatrix) -> list[np.ndarray]:
    """Neighbor lists from the non-zero off-diagonal pattern of L."""
    A = sparse.csr_matrix(L)
    out = []
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
        out.append(cols[cols != i])
    return out


def hop_distances(L: sparse.spmatrix, sources) -> np.ndarray:
    """Multi-source BFS hop counts over L's off-diagonal pattern (inf if unreachable)."""
    adj = adjacency_lists(L)
    dist = np.full(len(adj), np.inf)
    queue = deque()
    for i in sources:
        dist[i] = 0.0
        queue.append(i)
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if dist[j] == np.inf:
                dist[j] = dist[i] + 1.0
                queue.append(j)
    return dist


def edge_distance(s: SimplicialComplex, k: int, i: int, j: int) -> float:
    """Hop count between simplices i and j in L_k's adjacency (inf if disconnected)."""
    if not 0 <= k <= s.max_order:
        raise ComplexError(f"order {k} outside [0, {s.max_order}]")
    n = len(s.simplices[k])
    if not (0 <= i < n and 0 <= j < n):
        raise ComplexError(f"simplex index out of range at order {k}")
    if i == j:
        return 0.0
    L = hodge_laplacian(s, k)
    return float(hop_distances(L, [i])[j])


def verify_closure(s: SimplicialComplex) -> bool:
    """True when every face of every stored simplex is stored."""
    for k in range(1, s.max_order + 1):
        below = s.index[k - 1]
        for simplex in s.simplices[k]:
            for p in range(len(simplex)):
                if simplex[:p] + simplex[p + 1:] not in below:
                    return False
    return True

"""Structure minimization: masking Laplacian edges and simplices by rank.

Masks are symmetric binary matrices on each order's Laplacian sparsity
pattern. Diagonals are always retained so a simplex's own value still passes
through the degree-0 filter term after masking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .complexes import SimplicialComplex, hodge_laplacian, normalized_laplacian
from .spectral import dominant_eigenvalue

__all__ = [
    "LaplacianSet",
    "ReductionReport",
    "minimize_edges",
    "minimize_edges_fraction",
    "minimize_simplices",
    "minimize_random",
    "threshold_for_fraction",
]


@dataclass
class LaplacianSet:
    """Per-order Hodge Laplacians, their normalizations, and retention masks."""

    laplacians: list[sparse.csr_matrix]
    normalized: list[sparse.csr_matrix]
    masks: list[sparse.csr_matrix] | None = None

    @classmethod
    def from_complex(cls, s: SimplicialComplex) -> "LaplacianSet":
        laps = [hodge_laplacian(s, k) for k in range(s.max_order + 1)]
        return cls(laplacians=laps,
                   normalized=[normalized_laplacian(L) for L in laps])

    @property
    def max_order(self) -> int:
        return len(self.laplacians) - 1

    def masked(self, k: int) -> sparse.csr_matrix:
        if self.masks is None:
            return self.laplacians[k]
        return self.laplacians[k].multiply(self.masks[k]).tocsr()

    def masked_normalized(self, k: int) -> sparse.csr_matrix:
        if self.masks is None:
            return self.normalized[k]
        return self.normalized[k].multiply(self.masks[k]).tocsr()

    def with_masks(self, masks: list[sparse.csr_matrix]) -> "LaplacianSet":
        return LaplacianSet(self.laplacians, self.normalized, masks)

    _conv_cache: dict = field(default_factory=dict)

    def conv_operator(self, k: int) -> sparse.csr_matrix:
        """Row-normalized unsigned off-diagonal coupling at order k.

        Magnitudes are used because off-diagonal signs at orders >= 1 depend on
        the arbitrary reference orientation and cancel positive cochain values
        under summation; the coupling strength is the orientation-free part.
        Dropping the diagonal keeps the identity term of a polynomial filter as
        the only own-slot pathway, so neighbor aggregation at higher polynomial
        degrees is not contaminated by the slot's own (possibly masked) value.
        Row normalization turns each application into a weighted neighbor mean,
        comparable across slots of different degree, with spectral radius <= 1.
        Rows are normalized by the retained row sums, so a masked operator is
        the weighted mean over the couplings that survive reduction -- the same
        normalization the reduced structure's own degrees would induce.
        Operators are cached per order; masks are immutable per instance.
        """
        cached = self._conv_cache.get(k)
        if cached is not None:
            return cached
        off = abs(self.masked_normalized(k)).tolil(copy=True)
        off.setdiag(0.0)
        off = off.tocsr()
        rowsum = np.asarray(off.sum(axis=1)).ravel()
        op = (sparse.diags(1.0 / np.maximum(rowsum, 1e-12)) @ off).tocsr()
        self._conv_cache[k] = op
        return op


@dataclass
class ReductionReport:
    """Per-order accounting of what a minimization scheme retained."""

    scheme: str
    threshold: float
    original_edges: list[int]
    retained_edges: list[int]
    original_simplices: list[int]
    retained_simplices: list[int]
    retained_fraction: float = field(init=False)
    retained_weight_fraction: float = 0.0

    def __post_init__(self):
        total = sum(self.original_edges)
        kept = sum(self.retained_edges)
        self.retained_fraction = kept / total if total else 1.0

    def rows(self) -> list[dict]:
        """One mapping per order, ready for CSV emission."""
        return [
            {
                "scheme": self.scheme,
                "threshold": self.threshold,
                "order": k,
                "original_edges": self.original_edges[k],
                "retained_edges": self.retained_edges[k],
                "original_simplices": self.original_simplices[k],
                "retained_simplices": self.retained_simplices[k],
                "retained_fraction": self.retained_fraction,
            }
            for k in range(len(self.original_edges))
        ]


def _offdiag_coo(M: sparse.spmatrix):
    """COO triplets of the strictly off-diagonal entries."""
    C = sparse.coo_matrix(M)
    keep = C.row != C.col
    return C.row[keep], C.col[keep], C.data[keep]


def _full_mask(L: sparse.csr_matrix) -> sparse.csr_matrix:
    M = sparse.csr_matrix(L, copy=True)
    M.data = np.ones_like(M.data)
    M.setdiag(1.0)
    return M


def _build_masks(ls: LaplacianSet, keep_pair) -> tuple[list[sparse.csr_matrix], "ReductionStats"]:
    """Assemble symmetric masks from a per-order (k, i, j, |value|) predicate."""
    masks = []
    orig_e, kept_e = [], []
    weight_total = weight_kept = 0.0
    for k, L in enumerate(ls.laplacians):
        rows, cols, vals = _offdiag_coo(ls.normalized[k])
        raw = np.abs(np.asarray(
            sparse.coo_matrix(L).tocsr()[rows, cols]).ravel()) if len(rows) else np.array([])
        mask = _full_mask(L)
        removed = 0
        lil = mask.tolil()
        for idx in range(len(rows)):
            i, j = int(rows[idx]), int(cols[idx])
            weight_total += float(raw[idx])
            if keep_pair(k, i, j, abs(float(vals[idx]))):
                weight_kept += float(raw[idx])
            else:
                lil[i, j] = 0.0
                removed += 1
        mask = lil.tocsr()
        mask.eliminate_zeros()
        masks.append(mask)
        orig_e.append(len(rows))
        kept_e.append(len(rows) - removed)
    stats = ReductionStats(orig_e, kept_e, weight_total, weight_kept)
    return masks, stats


@dataclass
class ReductionStats:
    original_edges: list[int]
    retained_edges: list[int]
    weight_total: float
    weight_kept: float


def _report(scheme: str, threshold: float, ls: LaplacianSet,
            stats: ReductionStats, retained_simplices: list[int]) -> ReductionReport:
    report = ReductionReport(
        scheme=scheme,
        threshold=threshold,
        original_edges=stats.original_edges,
        retained_edges=stats.retained_edges,
        original_simplices=[L.shape[0] for L in ls.laplacians],
        retained_simplices=retained_simplices,
    )
    report.retained_weight_fraction = (
        stats.weight_kept / stats.weight_total if stats.weight_total else 1.0)
    return report


def minimize_edges(ls: LaplacianSet, l: float) -> tuple[LaplacianSet, ReductionReport]:
    """Drop off-diagonal entries whose normalized magnitude is <= l."""
    if l < 0:
        raise ValueError("threshold must be nonnegative")
    masks, stats = _build_masks(ls, lambda k, i, j, mag: mag > l)
    report = _report("edge-laplacian", l, ls, stats,
                     [L.shape[0] for L in ls.laplacians])
    return ls.with_masks(masks), report


def minimize_simplices(ls: LaplacianSet, l: float) -> tuple[LaplacianSet, ReductionReport]:
    """Mask whole rows/columns of simplices with normalized degree <= l.

    Degrees at each order are scaled by that order's maximum so thresholds are
    comparable across orders; masked simplices keep their diagonal entry.
    """
    if l < 0:
        raise ValueError("threshold must be nonnegative")
    removed_sets: list[set[int]] = []
    retained_simplices = []
    for L in ls.laplacians:
        d = np.asarray(L.diagonal(), dtype=float)
        dmax = d.max() if d.size else 0.0
        if dmax > 0:
            removed = set(np.flatnonzero(d / dmax <= l).tolist())
        else:
            removed = set()
        removed_sets.append(removed)
        retained_simplices.append(L.shape[0] - len(removed))
    masks, stats = _build_masks(
        ls, lambda k, i, j, mag: i not in removed_sets[k] and j not in removed_sets[k])
    report = _report("simplex-degree", l, ls, stats, retained_simplices)
    return ls.with_masks(masks), report


def minimize_edges_fraction(ls: LaplacianSet, fraction: float) -> tuple[LaplacianSet, ReductionReport]:
    """Remove the weakest `fraction` of symmetric coupling pairs by rank.

    Pairs are removed in ascending normalized-magnitude order with a
    deterministic tie order, so the retained count matches `minimize_random`
    at the same fraction. A magnitude threshold cannot do this: coupling
    magnitudes are heavily tied, so thresholding overshoots the requested
    removal by a large, structure-dependent amount and the two schemes stop
    being size-comparable.

    Removal never strands a slot: a pair is skipped when either endpoint has
    only one coupling left, so every slot keeps its strongest coupling (the
    analogue of always retaining diagonals). When the constraint binds near
    total removal, slightly fewer pairs than requested are removed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    pairs = []
    degree: dict[tuple[int, int], int] = {}
    for k, N in enumerate(ls.normalized):
        rows, cols, vals = _offdiag_coo(N)
        for i, j, v in zip(rows, cols, vals):
            if i < j:
                pairs.append((abs(float(v)), k, int(i), int(j)))
            degree[(k, int(i))] = degree.get((k, int(i)), 0) + 1
    pairs.sort()
    n_remove = int(round(fraction * len(pairs)))
    removed: set[tuple[int, int, int]] = set()
    for mag, k, i, j in pairs:
        if len(removed) >= n_remove:
            break
        if degree[(k, i)] <= 1 or degree[(k, j)] <= 1:
            continue
        removed.add((k, i, j))
        degree[(k, i)] -= 1
        degree[(k, j)] -= 1

    def keep(k, i, j, mag):
        a, b = (i, j) if i < j else (j, i)
        return (k, a, b) not in removed

    masks, stats = _build_masks(ls, keep)
    report = _report("edge-laplacian", fraction, ls, stats,
                     [L.shape[0] for L in ls.laplacians])
    return ls.with_masks(masks), report


def minimize_random(ls: LaplacianSet, fraction: float, seed: int) -> tuple[LaplacianSet, ReductionReport]:
    """Remove a uniformly random fraction of symmetric off-diagonal pairs."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    pairs = []
    for k, N in enumerate(ls.normalized):
        rows, cols, _ = _offdiag_coo(N)
        pairs.extend((k, int(i), int(j)) for i, j in zip(rows, cols) if i < j)
    rng = np.random.default_rng(seed)
    n_remove = int(round(fraction * len(pairs)))
    chosen = rng.choice(len(pairs), size=n_remove, replace=False) if pairs else []
    removed = {pairs[i] for i in np.sort(np.asarray(chosen, dtype=int))}

    def keep(k, i, j, mag):
        a, b = (i, j) if i < j else (j, i)
        return (k, a, b) not in removed

    masks, stats = _build_masks(ls, keep)
    report = _report("random-edge", fraction, ls, stats,
                     [L.shape[0] for L in ls.laplacians])
    return ls.with_masks(masks), report


def threshold_for_fraction(ls: LaplacianSet, target: float) -> float:
    """Smallest edge threshold removing at least `target` of off-diagonal entries."""
    if not 0.0 <= target <= 1.0:
        raise ValueError("target must lie in [0, 1]")
    mags = []
    for N in ls.normalized:
        _, _, vals = _offdiag_coo(N)
        mags.extend(abs(float(v)) for v in vals)
    if not mags or target == 0.0:
        return 0.0
    mags.sort()
    k = math.ceil(target * len(mags))
    return mags[k - 1]

"""Seeded power-iteration eigenvalue bounds for sparse symmetric matrices."""
from __future__ import annotations

import numpy as np
from scipy import sparse

__all__ = ["dominant_eigenvalue", "min_eigenvalue"]


def dominant_eigenvalue(A: sparse.spmatrix, iters: int = 300, seed: int = 0) -> float:
    """Largest-magnitude eigenvalue of a symmetric matrix by power iteration."""
    n = A.shape[0]
    if n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (A @ v))
    return lam


def min_eigenvalue(A: sparse.spmatrix, iters: int = 300, seed: int = 0) -> float:
    """Smallest eigenvalue of a symmetric matrix via a shifted power iteration.

    Uses lambda_min = lambda_max - dominant(lambda_max I - A), valid for any
    symmetric A whose dominant eigenvalue is nonnegative (e.g. PSD candidates).
    """
    n = A.shape[0]
    if n == 0:
        return 0.0
    lam_max = abs(dominant_eigenvalue(A, iters=iters, seed=seed))
    shifted = sparse.identity(n, format="csr") * lam_max - sparse.csr_matrix(A)
    mu = dominant_eigenvalue(shifted, iters=iters, seed=seed + 1)
    return lam_max - mu

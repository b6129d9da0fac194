"""Dense-vector primitives.

A token matrix is an ``(n, D)`` float64 array, one row per token, with row
order significant. A token vector is a 1-D array of length ``D``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def as_matrix(m, *, copy: bool = False) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D float64 token matrix with at least one row."""
    arr = np.array(m, dtype=np.float64, copy=copy) if copy else np.asarray(m, dtype=np.float64)
    if arr.ndim == 1 and arr.size:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("empty frame")
    if arr.shape[1] == 0:
        raise ValueError("token dimension must be >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("token matrix contains non-finite values")
    return arr


def cosine(a, b) -> float:
    """Cosine similarity of two vectors; 0.0 if either has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def row_cosines(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cosine of every row of ``m`` against ``v`` (zero-norm rows score 0)."""
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape[1]} vs {v.shape[0]}")
    norms = np.linalg.norm(m, axis=1)
    nv = np.linalg.norm(v)
    out = np.zeros(m.shape[0])
    if nv == 0.0:
        return out
    ok = norms > 0.0
    out[ok] = (m[ok] @ v) / (norms[ok] * nv)
    return np.clip(out, -1.0, 1.0)


def mean_pool(m) -> np.ndarray:
    """Elementwise mean over the tokens of a frame."""
    return as_matrix(m).mean(axis=0)


def pool_bins(n: int, k: int) -> list[tuple[int, int]]:
    """Half-open contiguous bins ``[floor(i*n/k), floor((i+1)*n/k))``.

    When ``k > n`` some bins would be empty under the floor rule; those are
    widened to the single token at their start, so tokens repeat.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 1:
        raise ValueError("empty frame")
    bins = []
    for i in range(k):
        lo = (i * n) // k
        hi = max(((i + 1) * n) // k, lo + 1)
        bins.append((lo, hi))
    return bins


def adaptive_avg_pool(m, k: int) -> np.ndarray:
    """Average contiguous token bins down (or up) to exactly ``k`` tokens."""
    m = as_matrix(m)
    bins = pool_bins(m.shape[0], k)
    if k == m.shape[0]:
        return m.copy()
    return np.stack([m[lo:hi].mean(axis=0) for lo, hi in bins])


def top_k_indices(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the ``k`` largest scores, lowest index first on ties, returned ascending.

    If ``k`` exceeds the number of scores, every index is returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("scores must be 1-D")
    if k >= s.size:
        return list(range(s.size))
    # stable sort on the negated scores keeps lower indices ahead on ties
    order = np.argsort(-s, kind="stable")[:k]
    return sorted(int(i) for i in order)

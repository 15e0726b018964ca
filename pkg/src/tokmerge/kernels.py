"""Hot numeric kernels with numba and pure-numpy implementations.

Backend selection is per-call via the TOKMERGE_BACKEND env var:
"numba" forces the jitted path (raises if numba is missing), "numpy"
forces the fallback, anything else auto-detects. Both paths implement
the same arithmetic; the clustering kernels are step-for-step identical
so they produce the same merge plans.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without the accel extra
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def use_numba() -> bool:
    mode = os.environ.get("TOKMERGE_BACKEND", "auto").lower()
    if mode == "numpy":
        return False
    if mode == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("TOKMERGE_BACKEND=numba but numba is not installed")
        return True
    return HAS_NUMBA


def active_backend() -> str:
    return "numba" if use_numba() else "numpy"


# -- row softmax ------------------------------------------------------------

def _softmax_rows_np(scores: np.ndarray) -> np.ndarray:
    m = scores.max(axis=1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=1, keepdims=True)


@njit(cache=True)
def _softmax_rows_nb(scores):  # pragma: no cover - numba path
    n, k = scores.shape
    out = np.empty((n, k))
    for i in range(n):
        m = scores[i, 0]
        for j in range(1, k):
            if scores[i, j] > m:
                m = scores[i, j]
        s = 0.0
        for j in range(k):
            v = np.exp(scores[i, j] - m)
            out[i, j] = v
            s += v
        for j in range(k):
            out[i, j] /= s
    return out


def softmax_rows_kernel(scores: np.ndarray) -> np.ndarray:
    if use_numba():
        return _softmax_rows_nb(scores)
    return _softmax_rows_np(scores)


# -- row entropies ----------------------------------------------------------

def _row_entropies_np(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > 0.0, p, 1.0)
    h = -(np.where(p > 0.0, p * np.log(safe), 0.0)).sum(axis=1)
    return np.maximum(h, 0.0)


@njit(cache=True)
def _row_entropies_nb(p):  # pragma: no cover - numba path
    n, k = p.shape
    out = np.empty(n)
    for i in range(n):
        h = 0.0
        for j in range(k):
            v = p[i, j]
            if v > 0.0:
                h -= v * np.log(v)
        out[i] = h if h > 0.0 else 0.0
    return out


def row_entropies_kernel(p: np.ndarray) -> np.ndarray:
    if use_numba():
        return _row_entropies_nb(p)
    return _row_entropies_np(p)


# -- pairwise cosine distance -----------------------------------------------

def _cosine_distances_np(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt((x * x).sum(axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = x / safe[:, None]
    unit[norms == 0.0] = 0.0  # zero vectors: similarity 0 to everything
    sim = unit @ unit.T
    np.clip(sim, -1.0, 1.0, out=sim)
    d = 1.0 - sim
    np.fill_diagonal(d, 0.0)
    return d


def cosine_distances_kernel(x: np.ndarray) -> np.ndarray:
    # BLAS matmul dominates; a jitted loop would not beat it.
    return _cosine_distances_np(x)


# -- average-linkage agglomeration ------------------------------------------
#
# State: sums[i, j] holds the total of base pairwise distances between the
# members of active clusters i and j; size[i] the member count. The average
# linkage is sums/(size_i*size_j). Each step merges the first (row-major
# scan over i<j) strictly-smallest pair, folding slot j into slot i, so the
# surviving slot index is always the cluster's minimum original token index.
# The two implementations below perform identical scans and identical
# single additions, so their label outputs match bitwise.

def _linkage_np(sums: np.ndarray, size: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    n = sums.shape[0]
    active = size > 0
    n_active = int(active.sum())
    tril = np.tril_indices(n)
    while n_active > k:
        safe = np.where(active, size, 1).astype(np.float64)
        avg = sums / np.outer(safe, safe)
        avg[~active, :] = np.inf
        avg[:, ~active] = np.inf
        avg[tril] = np.inf
        flat = int(np.argmin(avg))  # first occurrence = lexicographic (i, j)
        i, j = flat // n, flat % n
        sums[i, :] += sums[j, :]
        sums[:, i] += sums[:, j]
        sums[i, i] = 0.0
        size[i] += size[j]
        size[j] = 0
        active[j] = False
        labels[labels == j] = i
        n_active -= 1
    return labels


@njit(cache=True)
def _linkage_nb(sums, size, labels, k):  # pragma: no cover - numba path
    n = sums.shape[0]
    n_active = 0
    for i in range(n):
        if size[i] > 0:
            n_active += 1
    while n_active > k:
        best = np.inf
        bi = -1
        bj = -1
        for i in range(n):
            if size[i] == 0:
                continue
            for j in range(i + 1, n):
                if size[j] == 0:
                    continue
                d = sums[i, j] / (size[i] * size[j])
                if d < best:
                    best = d
                    bi = i
                    bj = j
        for m in range(n):
            sums[bi, m] += sums[bj, m]
        for m in range(n):
            sums[m, bi] += sums[m, bj]
        sums[bi, bi] = 0.0
        size[bi] += size[bj]
        size[bj] = 0
        for t in range(labels.shape[0]):
            if labels[t] == bj:
                labels[t] = bi
        n_active -= 1
    return labels


def linkage_kernel(sums: np.ndarray, size: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    if use_numba():
        return _linkage_nb(sums, size, labels.astype(np.int64), k)
    return _linkage_np(sums, size, labels.astype(np.int64), k)


def warmup() -> None:
    """Trigger jit compilation of all kernels (no-op on the numpy path)."""
    if not use_numba():
        return
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    _softmax_rows_nb(x)
    _row_entropies_nb(_softmax_rows_nb(x))
    d = _cosine_distances_np(x)
    _linkage_nb(d.copy(), np.ones(2, dtype=np.int64), np.arange(2, dtype=np.int64), 1)

"""Dense numeric primitives: row softmax, entropy, attention, cosine, Gumbel.

All public functions take and return float64 numpy arrays. Constructors
reject NaN/Inf; everything downstream may assume finite inputs.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DegenerateWarning, InvalidProbability, InvalidShape, NonFiniteInput
from .kernels import row_entropies_kernel, softmax_rows_kernel
from .rng import Rng


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and return x as a 2-D float64 C-order array."""
    m = np.ascontiguousarray(x, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise InvalidShape(f"{name} must be 2-D and nonempty, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return m


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidShape(f"{name} must be 1-D and nonempty, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return v


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with max-subtraction; each output row sums to 1."""
    scores = as_matrix(m, "scores")
    return softmax_rows_kernel(scores)


def row_entropy(p) -> float:
    """Shannon entropy (nats) of a probability row; 0*log 0 is taken as 0."""
    row = as_vector(p, "probability row")
    if (row < 0).any():
        raise InvalidProbability("probability row has a negative entry")
    total = row.sum()
    if abs(total - 1.0) > 1e-9:
        raise InvalidProbability(f"probability row sums to {total!r}, not 1")
    return float(row_entropies_kernel(row[None, :])[0])


def row_entropies(p) -> np.ndarray:
    """Entropy of every row of a row-stochastic matrix (validated like row_entropy)."""
    mat = as_matrix(p, "probability matrix")
    if (mat < 0).any():
        raise InvalidProbability("probability matrix has a negative entry")
    sums = mat.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise InvalidProbability("matrix rows must each sum to 1 within 1e-9")
    return row_entropies_kernel(mat)


def attention_from_embeddings(x, d: int | None = None) -> np.ndarray:
    """Self-attention matrix softmax(X X^T / sqrt(d)) for token rows X (N x D)."""
    emb = as_matrix(x, "embeddings")
    dim = emb.shape[1] if d is None else int(d)
    if dim != emb.shape[1] or dim < 1:
        raise InvalidShape(f"d={d} does not match embedding width {emb.shape[1]}")
    scores = (emb @ emb.T) / math.sqrt(dim)
    return softmax_rows_kernel(scores)


def cosine_similarity(a, b) -> float:
    """Cosine similarity in [-1, 1]; two zero vectors give 0 with a warning."""
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.shape != vb.shape:
        raise InvalidShape(f"vector shapes differ: {va.shape} vs {vb.shape}")
    na = math.sqrt(float(va @ va))
    nb = math.sqrt(float(vb @ vb))
    if na == 0.0 and nb == 0.0:
        warnings.warn("cosine of two zero vectors; returning 0", DegenerateWarning, stacklevel=2)
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(float(va @ vb) / (na * nb), -1.0, 1.0))


def gumbel_from_uniform(u):
    """Map uniform draws to Gumbel(0,1): -log(-log(u)), u clamped off {0, 1}."""
    c = np.clip(np.asarray(u, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    g = -np.log(-np.log(c))
    return float(g) if np.isscalar(u) or np.ndim(u) == 0 else g


def gumbel_draw(rng: Rng, size: int | None = None):
    """Gumbel(0,1) draws from the given stream; scalar when size is None."""
    return gumbel_from_uniform(rng.uniform(size))

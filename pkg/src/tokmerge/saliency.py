"""Stage 1: attention-entropy saliency plus the redundancy diagnostics.

Per layer, attention is recomputed from the embeddings themselves
(softmax of the scaled Gram matrix), each token's attention row is scored
by Shannon entropy, entropies are min-max normalized within the layer,
and the per-token saliency is the mean of the normalized values across
layers. The diagnostics (normalized entropy drop, incoming-column
variance, merge risk) are computed from a single attention matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateWarning, InvalidShape, NonFiniteInput
from .kernels import row_entropies_kernel
from .numerics import as_matrix, attention_from_embeddings
from .rng import Rng


@dataclass(frozen=True)
class EmbeddingStack:
    """Per-layer token embeddings, shape (layers, tokens, dim)."""

    layers: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.layers, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] == 0 or arr.shape[2] == 0 or arr.shape[0] == 0:
            raise InvalidShape(f"stack must be (L, N, D) with all dims >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteInput("stack contains NaN or Inf")
        object.__setattr__(self, "layers", arr)

    @classmethod
    def from_array(cls, arr) -> "EmbeddingStack":
        """Accept (N, D) as a single-layer stack or (L, N, D) directly."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 2:
            a = a[None, :, :]
        return cls(a)

    @property
    def num_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def n(self) -> int:
        return self.layers.shape[1]

    @property
    def dim(self) -> int:
        return self.layers.shape[2]

    @property
    def last(self) -> np.ndarray:
        """Final-layer embeddings; the tokens the pipeline clusters and merges."""
        return self.layers[-1]


@dataclass(frozen=True)
class SaliencyProfile:
    """Per-token saliency and diagnostics; arrays all have length N."""

    entropies: np.ndarray  # (L, N), nats
    s: np.ndarray  # saliency in [0, 1]
    ned: np.ndarray | None = None
    sigma2: np.ndarray | None = None
    proxy: np.ndarray | None = None


def attention_stack(stack: EmbeddingStack) -> np.ndarray:
    """(L, N, N) attention matrices, one per layer."""
    return np.stack([attention_from_embeddings(layer) for layer in stack.layers])


def entropies_from_attentions(attentions: np.ndarray) -> np.ndarray:
    return np.stack([row_entropies_kernel(a) for a in attentions])


def layer_entropies(stack: EmbeddingStack) -> np.ndarray:
    """(L, N) table of attention-row entropies, each in [0, ln N]."""
    return entropies_from_attentions(attention_stack(stack))


def normalize_layer(h, invert: bool = False) -> np.ndarray:
    """Min-max normalize a row to [0, 1]; constant rows map to all-0.5."""
    row = np.asarray(h, dtype=np.float64)
    lo, hi = row.min(), row.max()
    if hi == lo:
        out = np.full_like(row, 0.5)
    else:
        out = (row - lo) / (hi - lo)
    return 1.0 - out if invert else out


def saliency_scores(stack: EmbeddingStack, invert: bool = True) -> SaliencyProfile:
    """Mean over layers of normalized entropies.

    With invert=True (the default) low-entropy tokens score high, favoring
    tokens with sharp attention.
    """
    ent = layer_entropies(stack)
    s = np.mean([normalize_layer(row, invert) for row in ent], axis=0)
    return SaliencyProfile(entropies=ent, s=s)


def _column_entropy(col: np.ndarray) -> float:
    total = col.sum()
    if total <= 0.0:
        warnings.warn(
            "all-zero attention column; incoming entropy taken as 0",
            DegenerateWarning,
            stacklevel=3,
        )
        return 0.0
    return float(row_entropies_kernel((col / total)[None, :])[0])


def ned_scores(a, delta: float = 1e-6) -> np.ndarray:
    """Normalized entropy drop (H_in - H_out) / (H_in + delta) per token.

    H_out is the entropy of the token's attention row; H_in the entropy of
    its incoming column renormalized to a distribution.
    """
    att = as_matrix(a, "attention")
    if delta <= 0:
        raise ValueError("delta must be > 0")
    h_out = row_entropies_kernel(att)
    h_in = np.array([_column_entropy(att[:, i]) for i in range(att.shape[1])])
    return (h_in - h_out) / (h_in + delta)


class ColumnStats(NamedTuple):
    sigma2: np.ndarray  # variance of each incoming column
    mean: np.ndarray  # mean of each incoming column
    proxy: np.ndarray  # Var(col)/E[col] - Var(row), the drop proxy


def column_statistics(a) -> ColumnStats:
    """Incoming-column variance/mean and the entropy-drop proxy per token."""
    att = as_matrix(a, "attention")
    sigma2 = att.var(axis=0)
    mean = att.mean(axis=0)
    row_var = att.var(axis=1)
    ratio = np.divide(sigma2, mean, out=np.zeros_like(sigma2), where=mean > 0)
    return ColumnStats(sigma2=sigma2, mean=mean, proxy=ratio - row_var)


def stability_probe(
    stack: EmbeddingStack,
    perturbation_scale: float,
    rng: Rng,
    num_scales: int = 3,
    decay: float = 10.0,
) -> np.ndarray:
    """Sensitivity of NED to embedding drift on the final layer.

    Applies one fixed unit-Frobenius Gaussian direction at geometrically
    decreasing scales and returns an (num_scales, 2) table of
    (||dX||_F, max |dNED|) pairs. Callers assert the ratio stays bounded
    as the perturbation shrinks; scale 0 gives dNED exactly 0.
    """
    if perturbation_scale < 0:
        raise ValueError("perturbation_scale must be >= 0")
    x = stack.last
    base = ned_scores(attention_from_embeddings(x))
    direction = rng.normal(x.size).reshape(x.shape)
    fro = np.sqrt((direction * direction).sum())
    if fro > 0:
        direction = direction / fro
    rows = []
    for k in range(num_scales):
        scale = perturbation_scale / (decay**k)
        perturbed = x + scale * direction
        moved = ned_scores(attention_from_embeddings(perturbed))
        dx = np.sqrt(((perturbed - x) ** 2).sum())
        rows.append((dx, float(np.abs(moved - base).max())))
    return np.array(rows)


def merge_risk(ned_i: float, sigma2_i: float) -> float:
    """Upper bound exp(-ned^2 / (2 sigma^2)) on a token mattering post-merge.

    At sigma^2 = 0 the limit convention applies: 0 for ned != 0, else 1.
    """
    if sigma2_i < 0:
        raise ValueError("sigma2 must be >= 0")
    if sigma2_i == 0.0:
        return 1.0 if ned_i == 0.0 else 0.0
    return float(np.exp(-(ned_i**2) / (2.0 * sigma2_i)))

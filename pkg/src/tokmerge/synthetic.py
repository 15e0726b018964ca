"""Cluster-structured Gaussian stacks with known ground-truth grouping."""

from __future__ import annotations

import numpy as np

from .errors import InvalidShape
from .rng import Rng


def gen_stack(
    n: int, d: int, layers: int = 1, clusters: int = 2, noise: float = 0.05, seed: int = 0
):
    """Generate an (L, N, D) stack of noisy centroid copies plus the truth.

    Tokens are assigned to centroids in contiguous blocks, so the grouping
    respects sequence order. With noise 0 every token is an exact centroid
    row. Returns (stack, truth) where truth records the assignment.
    """
    if n < 1 or d < 1 or layers < 1 or clusters < 1 or clusters > n:
        raise InvalidShape(f"need 1 <= clusters <= n and d, layers >= 1, got n={n} d={d} layers={layers} clusters={clusters}")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = Rng(seed)
    centroids = rng.normal(clusters * d).reshape(clusters, d)
    assignments = np.minimum((np.arange(n) * clusters) // n, clusters - 1)
    base = centroids[assignments]
    stack = np.empty((layers, n, d))
    for layer in range(layers):
        jitter = rng.normal(n * d).reshape(n, d) if noise > 0 else 0.0
        stack[layer] = base + noise * jitter
    truth = {
        "n": n,
        "d": d,
        "layers": layers,
        "clusters": clusters,
        "noise": noise,
        "seed": seed,
        "assignments": [int(a) for a in assignments],
    }
    return stack, truth

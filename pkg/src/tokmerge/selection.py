"""Stage 2 selection: entropy-threshold budget, Gumbel-softmax mask, token mass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidBudget, InvalidTemperature
from .kernels import softmax_rows_kernel
from .numerics import as_vector, gumbel_draw
from .rng import Rng


@dataclass(frozen=True)
class BudgetRule:
    """Threshold-count budget: K = clamp(#{s_i >= alpha}, k_min, k_max)."""

    alpha: float
    k_max: int
    k_min: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k_min < 1 or self.k_max < 1 or self.k_min > self.k_max:
            raise ValueError(f"need 1 <= k_min <= k_max, got {self.k_min}..{self.k_max}")


@dataclass(frozen=True)
class SelectionSample:
    """One realized selection: probabilities, mask, merge mass, budget."""

    pi: np.ndarray
    mask: np.ndarray  # soft values in [0,1] or a hard 0/1 vector
    mass: np.ndarray
    budget: int
    tau: float
    epsilon: float


def estimate_budget(s, rule: BudgetRule) -> int:
    """Count of tokens at or above the saliency threshold, clamped to the rule."""
    sal = as_vector(s, "saliency")
    count = int((sal >= rule.alpha).sum())
    return max(rule.k_min, min(count, rule.k_max))


def gumbel_softmax(s, tau: float, rng: Rng | None = None, noise=None):
    """One Gumbel-softmax sample over all tokens: softmax((s + g) / tau).

    Returns (pi, soft_mask); the soft mask is the sample itself. `noise`
    overrides the Gumbel draw (tests force it to zero).
    """
    sal = as_vector(s, "saliency")
    if tau <= 0:
        raise InvalidTemperature(f"tau must be > 0, got {tau}")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise must be given")
        g = gumbel_draw(rng, sal.size)
    else:
        g = as_vector(noise, "noise")
        if g.shape != sal.shape:
            raise ValueError("noise must match saliency shape")
    pi = softmax_rows_kernel(((sal + g) / tau)[None, :])[0]
    return pi, pi.copy()


def harden(pi, k: int) -> np.ndarray:
    """Top-k 0/1 mask over pi; ties broken toward the lowest index.

    Straight-through convention: the hard mask is used forward, gradients
    (when training externally) flow through the soft probabilities.
    """
    probs = as_vector(pi, "pi")
    if k < 1 or k > probs.size:
        raise InvalidBudget(f"k must be in [1, {probs.size}], got {k}")
    order = np.argsort(-probs, kind="stable")  # stable sort keeps lowest index on ties
    mask = np.zeros_like(probs)
    mask[order[:k]] = 1.0
    return mask


def token_mass(mask, s, epsilon: float = 1e-6) -> np.ndarray:
    """Merge weight per token: mask*s + (1-mask)*epsilon (floor for unselected)."""
    m = as_vector(mask, "mask")
    sal = as_vector(s, "saliency")
    if m.shape != sal.shape:
        raise ValueError("mask and saliency must have equal length")
    if not 0.0 < epsilon <= 1e-2:
        raise ValueError(f"epsilon must be in (0, 1e-2], got {epsilon}")
    return m * sal + (1.0 - m) * epsilon

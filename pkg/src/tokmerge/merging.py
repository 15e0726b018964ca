"""Stage 2 merge and stage 4 fidelity: clustering, weighted averaging, bounds.

Clustering is average-linkage agglomeration under cosine distance
(1 - cosine similarity), run until exactly k clusters remain, with a
deterministic tie rule: the first strictly-smallest pair in row-major
(i, j) scan order wins. A knn variant seeds the agglomeration from the
connected components of the 1-nearest-neighbor graph before contracting
to k groups the same way.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateCluster, DegenerateWarning, InvalidBudget, InvalidShape
from .kernels import cosine_distances_kernel, linkage_kernel
from .numerics import as_matrix, as_vector

CLUSTER_METHODS = ("agglomerative", "knn")


@dataclass(frozen=True)
class MergePlan:
    """Disjoint index clusters covering range(n), ordered by minimum member."""

    clusters: tuple
    method: str
    n: int

    def __post_init__(self):
        seen = np.zeros(self.n, dtype=bool)
        for c in self.clusters:
            if len(c) == 0:
                raise InvalidShape("empty cluster in plan")
            if seen[c].any():
                raise InvalidShape("clusters overlap")
            seen[c] = True
        if not seen.all():
            raise InvalidShape("clusters do not cover all tokens")
        mins = [int(c[0]) for c in self.clusters]
        if mins != sorted(mins):
            raise InvalidShape("clusters must be ordered by minimum original index")

    @property
    def k(self) -> int:
        return len(self.clusters)

    def assignments(self) -> np.ndarray:
        """Per-token cluster index (into self.clusters)."""
        out = np.empty(self.n, dtype=np.int64)
        for ci, members in enumerate(self.clusters):
            out[members] = ci
        return out


@dataclass(frozen=True)
class MergedSequence:
    """K merged tokens (one per cluster, mass-weighted average) plus the plan."""

    tokens: np.ndarray
    plan: MergePlan

    @property
    def k(self) -> int:
        return self.tokens.shape[0]


class FlopModel(NamedTuple):
    flops_full: float
    flops_merged: float
    speedup: float


@dataclass(frozen=True)
class FidelityReport:
    gamma: float
    lhs: float  # ||X - pad(merged)||_F^2
    rhs_bound: float  # (1 - gamma)^2 ||X||_F^2
    cluster_spread: float  # sum_k sum_j m_j ||x_j - merged_k||^2
    bound_holds: bool  # reported, never asserted: fails on constructible inputs
    comp_rate: float
    flops_full: float
    flops_merged: float


def _labels_to_plan(labels: np.ndarray, method: str, n: int) -> MergePlan:
    # group indices per label, ordered by first occurrence (= min original index)
    first_seen = {}
    for t in range(n):
        first_seen.setdefault(int(labels[t]), []).append(t)
    clusters = sorted(first_seen.values(), key=lambda m: m[0])
    return MergePlan(
        clusters=tuple(np.array(m, dtype=np.int64) for m in clusters),
        method=method,
        n=n,
    )


def _knn_seed_labels(dist: np.ndarray) -> np.ndarray:
    """Union-find contraction of the 1-nearest-neighbor graph."""
    n = dist.shape[0]
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    nearest = np.argmin(d, axis=1)  # first occurrence on ties
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        ra, rb = find(i), find(int(nearest[i]))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n)])
    # relabel each component to its minimum member index
    labels = np.empty(n, dtype=np.int64)
    for root in np.unique(roots):
        members = np.where(roots == root)[0]
        labels[members] = members.min()
    return labels


def cluster(x, mass, k: int, method: str = "agglomerative") -> MergePlan:
    """Group N tokens into exactly k clusters under cosine distance.

    `mass` is accepted for interface parity with the merge step; the
    grouping itself is purely geometric.
    """
    emb = as_matrix(x, "tokens")
    as_vector(mass, "mass")
    n = emb.shape[0]
    if k < 1 or k > n:
        raise InvalidBudget(f"k must be in [1, {n}], got {k}")
    if method not in CLUSTER_METHODS:
        raise ValueError(f"unknown cluster method {method!r}")
    dist = cosine_distances_kernel(emb)

    if method == "knn":
        seed_labels = _knn_seed_labels(dist)
        slots = np.unique(seed_labels)
        if len(slots) >= k:
            # contract components agglomeratively down to k
            sums = np.zeros((n, n))
            size = np.zeros(n, dtype=np.int64)
            for a in slots:
                ma = np.where(seed_labels == a)[0]
                size[a] = len(ma)
                for b in slots:
                    if b > a:
                        mb = np.where(seed_labels == b)[0]
                        sums[a, b] = sums[b, a] = dist[np.ix_(ma, mb)].sum()
            labels = linkage_kernel(sums, size, seed_labels, k)
            return _labels_to_plan(labels, method, n)
        # 1-NN graph yielded fewer than k components; fall through to the
        # singleton-seeded agglomeration, which always reaches exactly k
        warnings.warn(
            f"knn seeding produced {len(slots)} < {k} groups; using agglomerative path",
            DegenerateWarning,
            stacklevel=2,
        )

    sums = dist.copy()
    size = np.ones(n, dtype=np.int64)
    labels = linkage_kernel(sums, size, np.arange(n, dtype=np.int64), k)
    return _labels_to_plan(labels, method, n)


def merge(x, mass, plan: MergePlan) -> MergedSequence:
    """Mass-weighted average per cluster, ordered by minimum original index.

    Callers should supply strictly positive masses; a cluster whose total
    mass is not positive has no defined average and raises.
    """
    emb = as_matrix(x, "tokens")
    m = as_vector(mass, "mass")
    if emb.shape[0] != plan.n or m.shape[0] != plan.n:
        raise InvalidShape("plan does not cover the token count")
    if (m < 0).any():
        raise DegenerateCluster("masses must be nonnegative")
    out = np.empty((plan.k, emb.shape[1]))
    for ci, members in enumerate(plan.clusters):
        total = m[members].sum()
        if total <= 0.0:
            raise DegenerateCluster(f"cluster {ci} has total mass {total}")
        if len(members) == 1:
            out[ci] = emb[members[0]]  # bitwise identity for singletons
            continue
        out[ci] = (m[members] @ emb[members]) / total
    return MergedSequence(tokens=out, plan=plan)


def pad_to_original(merged: MergedSequence, n: int) -> np.ndarray:
    """Cluster-broadcast padding: position i gets its cluster's merged token."""
    if merged.plan.n != n:
        raise InvalidShape(f"plan covers {merged.plan.n} tokens, not {n}")
    return merged.tokens[merged.plan.assignments()]


def retained_norm_gamma(x, k: int) -> float:
    """Fraction of total row-norm mass kept by the k largest-norm tokens."""
    emb = as_matrix(x, "tokens")
    n = emb.shape[0]
    if k < 1 or k > n:
        raise InvalidBudget(f"k must be in [1, {n}], got {k}")
    norms = np.sqrt((emb * emb).sum(axis=1))
    total = norms.sum()
    if total == 0.0:
        warnings.warn("all-zero token matrix; gamma taken as 1", DegenerateWarning, stacklevel=2)
        return 1.0
    top = np.argsort(-norms, kind="stable")[:k]  # ties: lowest index first
    return float(norms[top].sum() / total)


def flop_model(n: int, k: int, d: int) -> FlopModel:
    """Self-attention cost before/after merging and the quadratic speedup."""
    if n < 1 or k < 1 or d < 1 or k > n:
        raise InvalidBudget(f"need 1 <= k <= n and d >= 1, got n={n} k={k} d={d}")
    return FlopModel(
        flops_full=2.0 * n * n * d,
        flops_merged=2.0 * k * k * d,
        speedup=(n / k) ** 2,
    )


def fidelity_report(x, merged: MergedSequence, mass, k: int) -> FidelityReport:
    """Both sides of the reconstruction bound plus the analytic cost model.

    bound_holds is informational: the inequality depends on norm tracking
    informativeness and fails on adversarial inputs.
    """
    emb = as_matrix(x, "tokens")
    m = as_vector(mass, "mass")
    n = emb.shape[0]
    padded = pad_to_original(merged, n)
    lhs = float(((emb - padded) ** 2).sum())
    gamma = retained_norm_gamma(emb, k)
    rhs = (1.0 - gamma) ** 2 * float((emb * emb).sum())
    spread = 0.0
    for ci, members in enumerate(merged.plan.clusters):
        diff = emb[members] - merged.tokens[ci]
        spread += float((m[members] * (diff * diff).sum(axis=1)).sum())
    flops = flop_model(n, merged.k, emb.shape[1])
    return FidelityReport(
        gamma=gamma,
        lhs=lhs,
        rhs_bound=rhs,
        cluster_spread=spread,
        bound_holds=bool(lhs <= rhs + 1e-9),
        comp_rate=n / merged.k,
        flops_full=flops.flops_full,
        flops_merged=flops.flops_merged,
    )

"""End-to-end compression: saliency -> budget -> selection -> merge -> fidelity.

`compress` is a pure function of (stack, config) including the seed, so
repeated runs are bitwise identical. Batch runs derive one RNG stream per
item from the run seed, which makes results independent of scheduling.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidDirection, PipelineError, TokMergeError
from .merging import CLUSTER_METHODS, FidelityReport, MergedSequence, cluster, fidelity_report, merge
from .prior import FORWARD, PriorModel, predict_next
from .rng import Rng
from .saliency import (
    EmbeddingStack,
    SaliencyProfile,
    attention_stack,
    column_statistics,
    entropies_from_attentions,
    ned_scores,
    normalize_layer,
)
from .selection import BudgetRule, SelectionSample, estimate_budget, gumbel_softmax, harden, token_mass

_GUMBEL_STREAM = 7


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.45
    tau: float = 1.0
    epsilon: float = 1e-6
    delta: float = 1e-6
    k_max: int | None = None  # None: no cap beyond the token count
    k_min: int = 1
    invert_entropy: bool = True
    cluster_method: str = "agglomerative"
    seed: int = 0
    hard_selection: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0.0 < self.epsilon <= 1e-2:
            raise ValueError(f"epsilon must be in (0, 1e-2], got {self.epsilon}")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.k_min < 1 or (self.k_max is not None and self.k_max < self.k_min):
            raise ValueError(f"need 1 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if self.cluster_method not in CLUSTER_METHODS:
            raise ValueError(f"cluster_method must be one of {CLUSTER_METHODS}")


@dataclass(frozen=True)
class RunResult:
    merged: MergedSequence
    saliency: SaliencyProfile
    selection: SelectionSample
    fidelity: FidelityReport
    timings_ms: dict

    @property
    def n(self) -> int:
        return self.merged.plan.n

    @property
    def k(self) -> int:
        return self.merged.k


def _staged(timings: dict, stage: str, fn, *args, **kwargs):
    start = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except TokMergeError as exc:
        raise PipelineError(stage, exc) from exc
    timings[stage] = (time.perf_counter() - start) * 1e3
    return out


def compress(stack: EmbeddingStack, cfg: PipelineConfig) -> RunResult:
    """Run the full merging pipeline on one embedding stack."""
    if not isinstance(stack, EmbeddingStack):
        stack = EmbeddingStack.from_array(stack)
    n = stack.n
    timings: dict = {}

    def stage_saliency():
        attn = attention_stack(stack)
        ent = entropies_from_attentions(attn)
        s = np.mean([normalize_layer(row, cfg.invert_entropy) for row in ent], axis=0)
        last = attn[-1]
        stats = column_statistics(last)
        return ent, s, ned_scores(last, cfg.delta), stats

    ent, s, ned, stats = _staged(timings, "saliency", stage_saliency)
    profile = SaliencyProfile(entropies=ent, s=s, ned=ned, sigma2=stats.sigma2, proxy=stats.proxy)

    rule = BudgetRule(alpha=cfg.alpha, k_max=cfg.k_max if cfg.k_max is not None else n, k_min=cfg.k_min)
    k = _staged(timings, "budget", lambda: min(estimate_budget(s, rule), n))

    def stage_selection():
        noise_rng = Rng(cfg.seed).split(_GUMBEL_STREAM)
        pi, soft = gumbel_softmax(s, cfg.tau, rng=noise_rng)
        mask = harden(pi, k) if cfg.hard_selection else soft
        # selected tokens at the saliency floor (s = 0) would get zero merge
        # weight; floor every mass at epsilon so weighted averages stay defined
        mass = np.maximum(token_mass(mask, s, cfg.epsilon), cfg.epsilon)
        return SelectionSample(pi=pi, mask=mask, mass=mass, budget=k, tau=cfg.tau, epsilon=cfg.epsilon)

    sample = _staged(timings, "selection", stage_selection)

    tokens = stack.last
    plan = _staged(timings, "clustering", cluster, tokens, sample.mass, k, cfg.cluster_method)
    merged = _staged(timings, "merge", merge, tokens, sample.mass, plan)
    fidelity = _staged(timings, "fidelity", fidelity_report, tokens, merged, sample.mass, k)
    timings["total"] = sum(v for k_, v in timings.items() if k_ != "total")
    return RunResult(merged=merged, saliency=profile, selection=sample, fidelity=fidelity, timings_ms=timings)


@dataclass(frozen=True)
class DecodedResult:
    run: RunResult
    predictions: np.ndarray  # (K-1, D): prediction for each next merged token


def compress_and_decode(stack: EmbeddingStack, cfg: PipelineConfig, model: PriorModel) -> DecodedResult:
    """Compress, then roll the forward prior over the merged prefixes."""
    if model.direction != FORWARD:
        raise InvalidDirection(f"decoding requires a forward model, got {model.direction!r}")
    run = compress(stack, cfg)
    tokens = run.merged.tokens
    preds = [predict_next(model, tokens[: t + 1]) for t in range(tokens.shape[0] - 1)]
    predictions = np.array(preds) if preds else np.empty((0, tokens.shape[1]))
    return DecodedResult(run=run, predictions=predictions)


@dataclass(frozen=True)
class BatchItem:
    index: int
    result: RunResult | None
    error: str | None


def batch_compress(stacks: list, cfg: PipelineConfig, parallel: bool = False) -> list:
    """Compress each stack with its own seed stream; failures are per-item.

    Items may be EmbeddingStack instances or raw (N, D) / (L, N, D) arrays.
    Results are independent of scheduling: the item seed is derived from
    the run seed and the item index alone.
    """
    if not stacks:
        raise ValueError("batch must be nonempty")
    root = Rng(cfg.seed)

    def run_one(i: int) -> BatchItem:
        try:
            item_cfg = replace(cfg, seed=root.split(i).seed)
            return BatchItem(index=i, result=compress(stacks[i], item_cfg), error=None)
        except (TokMergeError, ValueError) as exc:
            return BatchItem(index=i, result=None, error=f"{type(exc).__name__}: {exc}")

    if parallel:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(run_one, range(len(stacks))))
    return [run_one(i) for i in range(len(stacks))]

import numpy as np
import pytest

from tokmerge.errors import InvalidDirection
from tokmerge.pipeline import (
    PipelineConfig,
    batch_compress,
    compress,
    compress_and_decode,
)
from tokmerge.prior import BACKWARD, FORWARD, PriorConfig, PriorModel
from tokmerge.rng import Rng
from tokmerge.saliency import EmbeddingStack
from tokmerge.synthetic import gen_stack


def random_stack(seed: int, layers=2, n=8, d=4) -> EmbeddingStack:
    return EmbeddingStack(Rng(seed).normal(layers * n * d).reshape(layers, n, d))


class TestCompress:
    def test_single_token_passthrough(self):
        stack = EmbeddingStack.from_array(np.array([[1.5, -2.0, 0.5]]))
        run = compress(stack, PipelineConfig(seed=1))
        assert run.k == 1
        assert run.merged.tokens.tobytes() == stack.last.tobytes()
        assert run.fidelity.lhs == 0.0
        assert run.fidelity.comp_rate == 1.0

    def test_duplicate_pairs_merge_together(self):
        a = np.array([2.0, 0.0, 0.0])
        b = np.array([0.0, 3.0, 0.0])
        tokens = np.vstack([a, a, b, b])
        stack = EmbeddingStack.from_array(tokens)
        run = compress(stack, PipelineConfig(alpha=0.0, k_max=2, seed=2))
        assert run.k == 2
        groups = {frozenset(int(i) for i in c) for c in run.merged.plan.clusters}
        assert groups == {frozenset({0, 1}), frozenset({2, 3})}
        for ci, members in enumerate(run.merged.plan.clusters):
            lo = tokens[members].min(axis=0)
            hi = tokens[members].max(axis=0)
            assert (run.merged.tokens[ci] >= lo).all() and (run.merged.tokens[ci] <= hi).all()

    def test_table_scale_fixture_hits_target_budget(self):
        arr, _ = gen_stack(n=128, d=32, layers=2, clusters=54, noise=0.02, seed=3)
        run = compress(EmbeddingStack(arr), PipelineConfig(alpha=0.0, k_max=54, seed=3))
        assert run.n == 128 and run.k == 54
        assert run.fidelity.comp_rate == pytest.approx(128 / 54, abs=1e-12)
        assert run.fidelity.comp_rate == pytest.approx(2.37, abs=0.01)

    def test_bitwise_reproducible(self):
        stack = random_stack(4)
        cfg = PipelineConfig(alpha=0.3, k_max=5, seed=77)
        a = compress(stack, cfg)
        b = compress(stack, cfg)
        assert a.merged.tokens.tobytes() == b.merged.tokens.tobytes()
        assert a.selection.pi.tobytes() == b.selection.pi.tobytes()
        assert a.saliency.s.tobytes() == b.saliency.s.tobytes()

    def test_budget_respects_bounds(self):
        stack = random_stack(5, n=10)
        for alpha in (0.0, 0.4, 1.0):
            for k_max in (1, 3, 10):
                run = compress(stack, PipelineConfig(alpha=alpha, k_max=k_max, seed=1))
                assert 1 <= run.k <= min(k_max, 10)
                assert run.merged.k == run.selection.budget == run.k

    def test_soft_selection_mode(self):
        stack = random_stack(6)
        run = compress(stack, PipelineConfig(alpha=0.0, k_max=4, seed=9, hard_selection=False))
        assert run.selection.mask.max() <= 1.0
        assert abs(run.selection.mask.sum() - 1.0) < 1e-9  # soft mask is pi itself
        assert (run.selection.mass > 0).all()

    def test_hard_mask_has_budget_ones(self):
        stack = random_stack(7)
        run = compress(stack, PipelineConfig(alpha=0.2, k_max=6, seed=10))
        assert run.selection.mask.sum() == run.k
        assert set(np.unique(run.selection.mask)) <= {0.0, 1.0}

    def test_timings_reported(self):
        run = compress(random_stack(8), PipelineConfig(seed=1))
        for stage in ("saliency", "budget", "selection", "clustering", "merge", "fidelity", "total"):
            assert stage in run.timings_ms
            assert run.timings_ms[stage] >= 0.0

    def test_profile_diagnostics_filled(self):
        run = compress(random_stack(9, n=6), PipelineConfig(seed=2))
        assert run.saliency.ned is not None and run.saliency.ned.shape == (6,)
        assert run.saliency.sigma2 is not None and (run.saliency.sigma2 >= 0).all()
        assert run.saliency.proxy is not None
        assert run.saliency.entropies.shape == (2, 6)
        assert (run.saliency.s >= 0).all() and (run.saliency.s <= 1).all()

    def test_knn_method_runs(self):
        run = compress(random_stack(10), PipelineConfig(alpha=0.0, k_max=3, seed=4, cluster_method="knn"))
        assert run.k == 3

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig(alpha=1.5)
        with pytest.raises(ValueError):
            PipelineConfig(tau=0.0)
        with pytest.raises(ValueError):
            PipelineConfig(k_min=3, k_max=2)


class TestCompressAndDecode:
    def test_single_token_no_predictions(self):
        stack = EmbeddingStack.from_array(np.ones((1, 4)))
        model = PriorModel.identity(dim=4)
        decoded = compress_and_decode(stack, PipelineConfig(seed=1), model)
        assert decoded.predictions.shape == (0, 4)

    def test_identity_model_predicts_prefix_final_tokens(self):
        stack = random_stack(11, n=6, d=4)
        cfg = PipelineConfig(alpha=0.0, k_max=3, seed=5)
        model = PriorModel.identity(dim=4, context=8)
        decoded = compress_and_decode(stack, cfg, model)
        merged = decoded.run.merged.tokens
        assert decoded.predictions.shape == (2, 4)
        for t in range(2):
            np.testing.assert_array_equal(decoded.predictions[t], merged[t])

    def test_backward_model_rejected(self):
        stack = random_stack(12)
        model = PriorModel.init(PriorConfig(dim=4, model_dim=8, heads=2), BACKWARD)
        with pytest.raises(InvalidDirection):
            compress_and_decode(stack, PipelineConfig(seed=1), model)

    def test_end_to_end_bitwise_reproducible(self):
        stack = random_stack(13, d=4)
        cfg = PipelineConfig(alpha=0.0, k_max=4, seed=21)
        model_cfg = PriorConfig(dim=4, layers=1, model_dim=8, heads=2, context=8, seed=2)
        a = compress_and_decode(stack, cfg, PriorModel.init(model_cfg, FORWARD, zero_output_head=False))
        b = compress_and_decode(stack, cfg, PriorModel.init(model_cfg, FORWARD, zero_output_head=False))
        assert a.predictions.tobytes() == b.predictions.tobytes()


class TestBatchCompress:
    def test_batch_of_one_matches_compress_with_split_seed(self):
        stack = random_stack(14)
        cfg = PipelineConfig(alpha=0.0, k_max=4, seed=31)
        batch = batch_compress([stack], cfg)
        item_cfg = PipelineConfig(alpha=0.0, k_max=4, seed=Rng(31).split(0).seed)
        direct = compress(stack, item_cfg)
        assert batch[0].result.merged.tokens.tobytes() == direct.merged.tokens.tobytes()

    def test_equal_items_equal_results(self):
        stack = random_stack(15)
        cfg = PipelineConfig(alpha=0.0, k_max=4, seed=32)
        first = batch_compress([stack, stack, stack], cfg)
        second = batch_compress([stack, stack, stack], cfg)
        for a, b in zip(first, second):
            assert a.result.merged.tokens.tobytes() == b.result.merged.tokens.tobytes()

    def test_parallel_equals_sequential(self):
        stacks = [random_stack(s, n=6 + s % 3) for s in range(6)]
        cfg = PipelineConfig(alpha=0.3, k_max=5, seed=33)
        seq = batch_compress(stacks, cfg, parallel=False)
        par = batch_compress(stacks, cfg, parallel=True)
        for a, b in zip(seq, par):
            assert a.index == b.index
            assert a.result.merged.tokens.tobytes() == b.result.merged.tokens.tobytes()

    def test_item_failure_recorded_batch_continues(self):
        good = random_stack(16)
        bad = np.ones((2, 2, 2, 2))  # 4-D: not a stack
        batch = batch_compress([good, bad, good], PipelineConfig(seed=1))
        assert batch[0].error is None and batch[2].error is None
        assert batch[1].result is None and "InvalidShape" in batch[1].error

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            batch_compress([], PipelineConfig(seed=1))

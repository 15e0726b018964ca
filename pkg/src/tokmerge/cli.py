"""Command-line surface: compress, saliency, train-prior, bench, gen-synthetic.

Exit codes: 0 success, 2 input/usage error, 3 pipeline error.
QM_SEED serves as the seed fallback when --seed is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .errors import TokMergeError
from .kernels import HAS_NUMBA
from .npyio import read_npy, write_npy
from .pipeline import PipelineConfig, compress
from .prior import BACKWARD, FORWARD, PriorConfig, PriorModel, save_checkpoint, train
from .report import build_report, write_report
from .saliency import EmbeddingStack, saliency_scores
from .synthetic import gen_stack


def _fail(msg: str, code: int) -> int:
    print(f"tokmerge: {msg}", file=sys.stderr)
    return code


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("QM_SEED")
    return int(env) if env else 0


def _load_stack(path) -> EmbeddingStack:
    arr = read_npy(path)
    if arr.ndim not in (2, 3):
        raise TokMergeError(f"{path}: expected (N, D) or (L, N, D), got shape {arr.shape}")
    return EmbeddingStack.from_array(arr)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.45)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--invert-entropy", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--cluster", choices=["agglomerative", "knn"], default="agglomerative")
    p.add_argument("--soft", action="store_true", help="keep the soft mask instead of top-K")


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        alpha=args.alpha,
        tau=args.tau,
        k_max=args.kmax,
        k_min=args.kmin,
        invert_entropy=args.invert_entropy,
        cluster_method=args.cluster,
        seed=_resolve_seed(args.seed),
        hard_selection=not args.soft,
    )


def _cmd_compress(args) -> int:
    try:
        cfg = _config_from_args(args)
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        stack = _load_stack(args.input)
    except (TokMergeError, OSError) as exc:
        return _fail(str(exc), 2)
    try:
        run = compress(stack, cfg)
    except TokMergeError as exc:
        return _fail(str(exc), 3)
    write_npy(run.merged.tokens, args.output)
    if args.report:
        write_report(build_report(cfg, [run]), args.report)
    print(f"compressed {run.n} -> {run.k} tokens (rate {run.fidelity.comp_rate:.3f}) into {args.output}")
    return 0


def _cmd_saliency(args) -> int:
    try:
        stack = _load_stack(args.input)
    except (TokMergeError, OSError) as exc:
        return _fail(str(exc), 2)
    try:
        profile = saliency_scores(stack, invert=args.invert_entropy)
    except TokMergeError as exc:
        return _fail(str(exc), 3)
    write_npy(profile.s, args.output)
    if args.report:
        doc = {
            "tokens": stack.n,
            "layers": stack.num_layers,
            "saliency": [float(v) for v in profile.s],
            "entropies": [[float(v) for v in row] for row in profile.entropies],
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"saliency for {stack.n} tokens written to {args.output}")
    return 0


def _cmd_gen_synthetic(args) -> int:
    seed = _resolve_seed(args.seed)
    try:
        stack, truth = gen_stack(
            n=args.n, d=args.d, layers=args.layers, clusters=args.clusters, noise=args.noise, seed=seed
        )
    except (TokMergeError, ValueError) as exc:
        return _fail(str(exc), 2)
    write_npy(stack, args.output)
    truth_path = f"{args.output}.truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.layers}x{args.n}x{args.d} stack to {args.output} (truth: {truth_path})")
    return 0


def _cmd_train_prior(args) -> int:
    try:
        corpus_arr = read_npy(args.corpus)
    except (TokMergeError, OSError) as exc:
        return _fail(str(exc), 2)
    if corpus_arr.ndim != 3:
        return _fail(f"{args.corpus}: corpus must be (M, K, D), got {corpus_arr.shape}", 2)
    m, k, d = corpus_arr.shape
    cfg = PriorConfig(
        dim=d,
        layers=args.layers,
        model_dim=args.model_dim,
        heads=args.heads,
        context=max(args.context, k),
        learn_rate=args.lr,
        epochs=args.epochs,
        momentum=args.momentum,
        seed=_resolve_seed(args.seed),
    )
    fwd = PriorModel.init(cfg, FORWARD)
    bwd = PriorModel.init(cfg, BACKWARD)
    try:
        trace = train(fwd, bwd, list(corpus_arr), cfg)
    except TokMergeError as exc:
        return _fail(str(exc), 3)
    save_checkpoint(fwd, args.output)
    if args.output_backward:
        save_checkpoint(bwd, args.output_backward)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump({"epochs": len(trace), "loss": trace}, fh, indent=2)
            fh.write("\n")
    print(f"trained on {m} sequences for {len(trace)} epochs; loss {trace[0]:.6f} -> {trace[-1]:.6f}")
    return 0


def _parse_synthetic_spec(spec: str) -> dict:
    out = {"n": 128, "d": 64, "layers": 3, "clusters": 54, "noise": 0.05}
    if spec:
        for part in spec.split(","):
            key, _, value = part.partition("=")
            key = key.strip()
            if key not in out:
                raise ValueError(f"unknown synthetic key {key!r}")
            out[key] = float(value) if key == "noise" else int(value)
    return out


def _cmd_bench(args) -> int:
    if bool(args.input) == bool(args.synthetic is not None):
        return _fail("bench needs exactly one of --input or --synthetic", 2)
    try:
        cfg = _config_from_args(args)
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        if args.input:
            stack = _load_stack(args.input)
        else:
            params = _parse_synthetic_spec(args.synthetic)
            arr, _ = gen_stack(seed=_resolve_seed(args.seed), **params)
            stack = EmbeddingStack.from_array(arr)
    except (TokMergeError, ValueError, OSError) as exc:
        return _fail(str(exc), 2)
    try:
        runs = [compress(stack, cfg) for _ in range(args.repeats)]
    except TokMergeError as exc:
        return _fail(str(exc), 3)
    doc = build_report(cfg, runs)
    agg = doc["aggregate"]
    print(f"{'metric':<18}{'value':>14}")
    print(f"{'tokens before':<18}{agg['n']['mean']:>14.2f}")
    print(f"{'tokens after':<18}{agg['k']['mean']:>14.2f}")
    print(f"{'comp_rate':<18}{agg['comp_rate']['mean']:>14.4f}")
    print(f"{'flop speedup':<18}{agg['speedup']['mean']:>14.4f}")
    stages = runs[0].timings_ms.keys()
    for stage in stages:
        mean_ms = float(np.mean([r.timings_ms[stage] for r in runs]))
        print(f"{'t_' + stage + ' (ms)':<18}{mean_ms:>14.3f}")
    if args.compare_backends:
        _print_backend_comparison(stack, cfg)
    if args.report:
        write_report(doc, args.report)
    return 0


def _print_backend_comparison(stack: EmbeddingStack, cfg: PipelineConfig) -> None:
    """Run the pipeline once per kernel backend and report times + deviation."""
    results = {}
    previous = os.environ.get("TOKMERGE_BACKEND")
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    try:
        for backend in backends:
            os.environ["TOKMERGE_BACKEND"] = backend
            compress(stack, cfg)  # warm (jit compile / cache touch)
            start = time.perf_counter()
            run = compress(stack, cfg)
            elapsed = (time.perf_counter() - start) * 1e3
            results[backend] = (elapsed, run.merged.tokens)
    finally:
        if previous is None:
            os.environ.pop("TOKMERGE_BACKEND", None)
        else:
            os.environ["TOKMERGE_BACKEND"] = previous
    print(f"{'backend':<18}{'total (ms)':>14}")
    for backend, (elapsed, _) in results.items():
        print(f"{backend:<18}{elapsed:>14.3f}")
    if len(results) == 2:
        gap = float(np.abs(results["numpy"][1] - results["numba"][1]).max())
        print(f"{'max |deviation|':<18}{gap:>14.3e}")
    else:
        print("numba unavailable; numpy fallback only")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tokmerge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="merge an embedding stack down to K tokens")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report")
    _add_pipeline_flags(p)
    p.set_defaults(fn=_cmd_compress)

    p = sub.add_parser("saliency", help="write per-token saliency scores")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report")
    p.add_argument("--invert-entropy", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(fn=_cmd_saliency)

    p = sub.add_parser("gen-synthetic", help="generate a cluster-structured stack")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_gen_synthetic)

    p = sub.add_parser("train-prior", help="train the bidirectional AR prior")
    p.add_argument("--corpus", required=True, help="NPY file of shape (M, K, D)")
    p.add_argument("--output", required=True, help="forward checkpoint path")
    p.add_argument("--output-backward")
    p.add_argument("--trace")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--model-dim", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--context", type=int, default=16)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_train_prior)

    p = sub.add_parser("bench", help="report compression and analytic FLOP savings")
    p.add_argument("--input")
    p.add_argument("--synthetic", nargs="?", const="", default=None, metavar="SPEC",
                   help="e.g. n=128,d=64,layers=3,clusters=54,noise=0.02")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--report")
    p.add_argument("--compare-backends", action="store_true")
    _add_pipeline_flags(p)
    p.set_defaults(fn=_cmd_bench)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

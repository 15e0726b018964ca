"""Bidirectional autoregressive prior over merged token sequences.

A small causal transformer decoder regresses the next embedding from the
prefix; the backward variant is an identically-shaped decoder with its
own parameters applied to the reversed sequence. Training is plain
gradient descent (optional momentum) on the summed squared-error losses,
driven by the reverse-mode tape in `autodiff`. Only the forward decoder
runs at inference time.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (
    DivergedTraining,
    InvalidDirection,
    InvalidPrefix,
    InvalidShape,
    NotNpy,
)
from .rng import Rng

FORWARD = "forward"
BACKWARD = "backward"

_CKPT_MAGIC = b"TMPR"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class PriorConfig:
    """Desk-scale decoder shape; the full-scale sizes are reachable by config."""

    dim: int  # embedding width D of the sequences being modeled
    layers: int = 2
    model_dim: int = 32
    heads: int = 2
    context: int = 16
    ff_dim: int | None = None  # defaults to 2 * model_dim
    learn_rate: float = 1e-4  # losses are raw sums; larger rates overshoot
    epochs: int = 200
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise InvalidShape(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.dim < 1 or self.layers < 1 or self.context < 1:
            raise InvalidShape("dim, layers and context must all be >= 1")
        if self.ff_dim is None:
            object.__setattr__(self, "ff_dim", 2 * self.model_dim)


def _param_spec(cfg: PriorConfig) -> list[tuple[str, tuple[int, ...]]]:
    spec = [
        ("w_in", (cfg.dim, cfg.model_dim)),
        ("b_in", (cfg.model_dim,)),
        ("pos", (cfg.context, cfg.model_dim)),
    ]
    for l in range(cfg.layers):
        spec += [
            (f"l{l}.wq", (cfg.model_dim, cfg.model_dim)),
            (f"l{l}.wk", (cfg.model_dim, cfg.model_dim)),
            (f"l{l}.wv", (cfg.model_dim, cfg.model_dim)),
            (f"l{l}.wo", (cfg.model_dim, cfg.model_dim)),
            (f"l{l}.w1", (cfg.model_dim, cfg.ff_dim)),
            (f"l{l}.b1", (cfg.ff_dim,)),
            (f"l{l}.w2", (cfg.ff_dim, cfg.model_dim)),
            (f"l{l}.b2", (cfg.model_dim,)),
        ]
    spec += [("w_out", (cfg.model_dim, cfg.dim)), ("b_out", (cfg.dim,))]
    return spec


@dataclass
class PriorModel:
    config: PriorConfig
    direction: str
    params: dict = field(repr=False)

    @classmethod
    def init(cls, cfg: PriorConfig, direction: str = FORWARD, zero_output_head: bool = True) -> "PriorModel":
        """Seeded initialization; the output head starts at zero by default."""
        if direction not in (FORWARD, BACKWARD):
            raise InvalidDirection(f"direction must be forward or backward, got {direction!r}")
        stream = Rng(cfg.seed).split(0 if direction == FORWARD else 1)
        params = {}
        for name, shape in _param_spec(cfg):
            if name.startswith("b") or ".b" in name:
                value = np.zeros(shape)
            elif name == "pos":
                value = 0.01 * stream.normal(int(np.prod(shape))).reshape(shape)
            elif name in ("w_out", "b_out") and zero_output_head:
                value = np.zeros(shape)
            else:
                fan_in = shape[0]
                value = stream.normal(int(np.prod(shape))).reshape(shape) / math.sqrt(fan_in)
            params[name] = ad.Var(value)
        return cls(config=cfg, direction=direction, params=params)

    @classmethod
    def identity(cls, dim: int, context: int = 16, direction: str = FORWARD) -> "PriorModel":
        """Skip-connection-only decoder computing f(prefix) = last prefix token."""
        cfg = PriorConfig(dim=dim, layers=1, model_dim=dim, heads=1, context=context)
        model = cls.init(cfg, direction=direction, zero_output_head=True)
        for var in model.params.values():
            var.value[...] = 0.0
        model.params["w_in"].value[...] = np.eye(dim)
        model.params["w_out"].value[...] = np.eye(dim)
        return model

    def outputs(self, tokens: np.ndarray) -> ad.Var:
        """(T, D) -> (T, D): position t's row depends only on tokens <= t."""
        cfg = self.config
        seq = np.ascontiguousarray(tokens, dtype=np.float64)
        if seq.ndim != 2 or seq.shape[1] != cfg.dim:
            raise InvalidShape(f"sequence must be (T, {cfg.dim}), got {seq.shape}")
        t = seq.shape[0]
        if t < 1 or t > cfg.context:
            raise InvalidPrefix(f"length {t} outside [1, context={cfg.context}]")
        p = self.params
        dh = cfg.model_dim // cfg.heads
        h = ad.add_row(ad.matmul(ad.Var(seq), p["w_in"]), p["b_in"])
        h = ad.add(h, ad.slice_rows(p["pos"], t))
        for l in range(cfg.layers):
            q = ad.matmul(h, p[f"l{l}.wq"])
            k = ad.matmul(h, p[f"l{l}.wk"])
            v = ad.matmul(h, p[f"l{l}.wv"])
            heads = []
            for hd in range(cfg.heads):
                lo, hi = hd * dh, (hd + 1) * dh
                scores = ad.scale(
                    ad.matmul_nt(ad.slice_cols(q, lo, hi), ad.slice_cols(k, lo, hi)),
                    1.0 / math.sqrt(dh),
                )
                heads.append(ad.matmul(ad.causal_softmax(scores), ad.slice_cols(v, lo, hi)))
            h = ad.add(h, ad.matmul(ad.concat_cols(heads), p[f"l{l}.wo"]))
            ff = ad.tanh(ad.add_row(ad.matmul(h, p[f"l{l}.w1"]), p[f"l{l}.b1"]))
            h = ad.add(h, ad.add_row(ad.matmul(ff, p[f"l{l}.w2"]), p[f"l{l}.b2"]))
        return ad.add_row(ad.matmul(h, p["w_out"]), p["b_out"])

    def zero_grads(self) -> None:
        for var in self.params.values():
            var.grad = None


def predict_next(model: PriorModel, prefix: np.ndarray) -> np.ndarray:
    """Next-embedding prediction from a nonempty prefix of merged tokens."""
    seq = np.asarray(prefix, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise InvalidPrefix(f"prefix must be (T>=1, D), got {seq.shape}")
    return model.outputs(seq).value[-1].copy()


def _loss_next_var(model: PriorModel, seq: np.ndarray) -> ad.Var:
    tokens = np.ascontiguousarray(seq, dtype=np.float64)
    if tokens.shape[0] < 2:
        return ad.const_zero()
    out = model.outputs(tokens)
    return ad.sse(ad.slice_rows(out, tokens.shape[0] - 1), tokens[1:])


def loss_forward(model: PriorModel, seq: np.ndarray) -> float:
    """Sum over t of ||f(prefix <= t) - token_{t+1}||^2; zero for K = 1."""
    return float(_loss_next_var(model, seq).value)


def loss_backward(model: PriorModel, seq: np.ndarray) -> float:
    """Forward loss of the reversed sequence (previous-token regression)."""
    return float(_loss_next_var(model, np.asarray(seq, dtype=np.float64)[::-1]).value)


def loss_ar(fwd: PriorModel, bwd: PriorModel, seq: np.ndarray) -> float:
    if fwd.direction != FORWARD or bwd.direction != BACKWARD:
        raise InvalidDirection(
            f"expected (forward, backward) models, got ({fwd.direction}, {bwd.direction})"
        )
    return loss_forward(fwd, seq) + loss_backward(bwd, seq)


def train(fwd: PriorModel, bwd: PriorModel, corpus: list, cfg: PriorConfig) -> list:
    """Joint full-batch gradient descent; returns the per-epoch loss trace."""
    if fwd.direction != FORWARD or bwd.direction != BACKWARD:
        raise InvalidDirection("train expects a (forward, backward) model pair")
    if not corpus:
        raise InvalidShape("corpus must be nonempty")
    sequences = [np.ascontiguousarray(s, dtype=np.float64) for s in corpus]
    leaves = list(fwd.params.values()) + list(bwd.params.values())
    velocity = [np.zeros_like(v.value) for v in leaves]
    trace = []
    for epoch in range(cfg.epochs):
        total = ad.const_zero()
        for seq in sequences:
            total = ad.add(total, _loss_next_var(fwd, seq))
            total = ad.add(total, _loss_next_var(bwd, seq[::-1]))
        loss = float(total.value)
        if math.isnan(loss):
            raise DivergedTraining(epoch)
        ad.backward(total)
        for i, leaf in enumerate(leaves):
            if leaf.grad is None:
                continue
            if cfg.momentum > 0.0:
                velocity[i] = cfg.momentum * velocity[i] + leaf.grad
                leaf.value -= cfg.learn_rate * velocity[i]
            else:
                leaf.value -= cfg.learn_rate * leaf.grad
            leaf.grad = None
        trace.append(loss)
    return trace


def gradient_check(
    model: PriorModel,
    seq: np.ndarray,
    h: float = 1e-5,
    num_params: int = 50,
    rng: Rng | None = None,
) -> float:
    """Max relative error of tape gradients vs central differences.

    Samples parameter coordinates at random; relative error is
    |analytic - cd| / max(|analytic|, |cd|, 1e-12).
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"h must be in [1e-6, 1e-4], got {h}")
    rng = rng or Rng(0)
    model.zero_grads()
    ad.backward(_loss_next_var(model, seq))
    grads = {name: (v.grad.copy() if v.grad is not None else np.zeros_like(v.value)) for name, v in model.params.items()}
    model.zero_grads()

    coords = [(name, i) for name, v in sorted(model.params.items()) for i in range(v.value.size)]
    chosen = [coords[rng.integer(0, len(coords))] for _ in range(num_params)]
    worst = 0.0
    for name, flat in chosen:
        value = model.params[name].value
        orig = value.flat[flat]
        value.flat[flat] = orig + h
        up = loss_forward(model, seq)
        value.flat[flat] = orig - h
        down = loss_forward(model, seq)
        value.flat[flat] = orig
        cd = (up - down) / (2.0 * h)
        a = grads[name].flat[flat]
        rel = abs(a - cd) / max(abs(a), abs(cd), 1e-12)
        worst = max(worst, rel)
    return worst


@dataclass(frozen=True)
class DivergenceProbe:
    output_gap: float  # mean over prefixes of ||f(merged) - f(full)||^2
    input_gap: float  # mean per-token squared distortion
    ratio: float  # empirical squared-Lipschitz estimate
    identical: bool


def lipschitz_divergence_probe(
    model: PriorModel, full: np.ndarray, merged_padded: np.ndarray
) -> DivergenceProbe:
    """Prediction drift per unit of merge distortion, over all prefixes."""
    a = np.ascontiguousarray(full, dtype=np.float64)
    b = np.ascontiguousarray(merged_padded, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidShape(f"sequences must share shape, got {a.shape} vs {b.shape}")
    t = a.shape[0]
    out_full = model.outputs(a).value
    out_merged = model.outputs(b).value
    output_gap = float(((out_merged - out_full) ** 2).sum() / t)
    input_gap = float(((b - a) ** 2).sum() / t)
    if input_gap == 0.0:
        return DivergenceProbe(output_gap, 0.0, 0.0, identical=True)
    return DivergenceProbe(output_gap, input_gap, output_gap / input_gap, identical=False)


def save_checkpoint(model: PriorModel, path) -> None:
    """Versioned header, shape table, then a raw little-endian f8 blob."""
    cfg = model.config
    names = [name for name, _ in _param_spec(cfg)]
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HB", _CKPT_VERSION, 0 if model.direction == FORWARD else 1))
        fh.write(
            struct.pack(
                "<6I", cfg.dim, cfg.layers, cfg.model_dim, cfg.heads, cfg.context, cfg.ff_dim
            )
        )
        fh.write(struct.pack("<Qd I d", cfg.seed & (2**64 - 1), cfg.learn_rate, cfg.epochs, cfg.momentum))
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            raw = name.encode("utf-8")
            shape = model.params[name].value.shape
            fh.write(struct.pack("<HB", len(raw), len(shape)))
            fh.write(raw)
            for dim in shape:
                fh.write(struct.pack("<I", dim))
        for name in names:
            arr = np.ascontiguousarray(model.params[name].value, dtype="<f8")
            fh.write(arr.tobytes())


def load_checkpoint(path) -> PriorModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise NotNpy("not a prior checkpoint (bad magic)")
        version, direction_code = struct.unpack("<HB", fh.read(3))
        if version != _CKPT_VERSION:
            raise NotNpy(f"unsupported checkpoint version {version}")
        dim, layers, model_dim, heads, context, ff_dim = struct.unpack("<6I", fh.read(24))
        seed, learn_rate, epochs, momentum = struct.unpack("<Qd I d", fh.read(28))
        cfg = PriorConfig(
            dim=dim,
            layers=layers,
            model_dim=model_dim,
            heads=heads,
            context=context,
            ff_dim=ff_dim,
            learn_rate=learn_rate,
            epochs=epochs,
            momentum=momentum,
            seed=seed,
        )
        (count,) = struct.unpack("<I", fh.read(4))
        table = []
        for _ in range(count):
            name_len, ndim = struct.unpack("<HB", fh.read(3))
            name = fh.read(name_len).decode("utf-8")
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            table.append((name, shape))
        params = {}
        for name, shape in table:
            n = int(np.prod(shape)) if shape else 1
            blob = fh.read(8 * n)
            if len(blob) != 8 * n:
                raise NotNpy("checkpoint blob truncated")
            params[name] = ad.Var(np.frombuffer(blob, dtype="<f8").reshape(shape).copy())
    direction = FORWARD if direction_code == 0 else BACKWARD
    return PriorModel(config=cfg, direction=direction, params=params)

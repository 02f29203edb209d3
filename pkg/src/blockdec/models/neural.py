"""Trainable k-head scoring model in plain numpy.

A small decoder-only transformer handles sequence-to-sequence tasks by
composing `input + SEP + output` into one token stream. Between the decoder
trunk and the shared vocabulary projection sits a k-head extension layer: a
single feedforward layer whose hidden width is k * d_hidden and whose output
is k vectors of width d_model, each with a residual connection back to the
trunk output. Head h at position p predicts the token h steps ahead, so one
forward pass yields proposal distributions for a whole block, and the base
next-token distribution (head 1) is routed through the same extension layer.

Scoring pads every forward pass to the model's fixed context length. With a
causal mask the activations at position p then depend only on the tokens at
positions <= p, and the fixed shapes keep floating point evaluation order
identical across calls, so the same conditioning context always reproduces
bit-identical distributions. The decode engine relies on this to re-read
grid rows across invocations.

Training optimizes the cross-entropy of one head per step. Sampling that
head uniformly at random makes the per-step loss an unbiased estimator of
the mean loss over all k heads, at one head's cost. Parameter partitions
(trunk, head extension, vocabulary projection) can be frozen independently,
which supports bolting new heads onto a frozen pretrained trunk.

All gradients are computed by hand; see `loss_and_gradients`. They are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..engine import BlockScores
from ..errors import ConfigurationError, LengthError, NumericError
from .base import ScoringModel

LN_EPS = 1e-5
MASK_VALUE = -1e9

PARTITIONS = ("base", "head_extension", "vocab_projection")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and task settings for a TinyBlockModel.

    vocab_size:      shared vocabulary size, including SEP and any EOS
    d_model:         trunk width
    d_hidden:        feedforward hidden width per head
    num_heads:       proposal heads k (head 1 is the base model)
    num_layers:      transformer layers in the trunk
    max_context:     fixed context length every forward pass is padded to
    sep_token:       id inserted between input and output
    eos_token:       id that ends an output, or None for fixed-length tasks
    intensity_vocab: token ids are integer intensities (enables the
                     distance acceptance criterion)
    """

    vocab_size: int
    d_model: int
    d_hidden: int
    num_heads: int
    num_layers: int
    max_context: int
    sep_token: int
    eos_token: Optional[int] = None
    intensity_vocab: bool = False

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigurationError("vocab_size must be >= 2")
        for name in ("d_model", "d_hidden", "num_heads", "num_layers", "max_context"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not 0 <= self.sep_token < self.vocab_size:
            raise ConfigurationError("sep_token outside vocabulary")
        if self.eos_token is not None and not 0 <= self.eos_token < self.vocab_size:
            raise ConfigurationError("eos_token outside vocabulary")


@dataclass(frozen=True)
class FreezeMask:
    """Which parameter partitions a train step must not update."""

    base: bool = False
    head_extension: bool = False
    vocab_projection: bool = False

    def frozen(self, partition: str) -> bool:
        return bool(getattr(self, partition))


def partition_of(name: str) -> str:
    if name.startswith("ext."):
        return "head_extension"
    if name.startswith("proj."):
        return "vocab_projection"
    return "base"


def _log_softmax64(logits: np.ndarray) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class TinyBlockModel(ScoringModel):
    """Decoder-only trunk plus k-head extension, scored over padded context."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32, params=None):
        self.config = config
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ConfigurationError("dtype must be float32 or float64")
        self.num_heads = config.num_heads
        self.vocab_size = config.vocab_size
        self.intensity_vocab = config.intensity_vocab
        if params is not None:
            shapes = self._param_shapes()
            if set(params) != set(shapes):
                missing = set(shapes).symmetric_difference(params)
                raise ConfigurationError(f"parameter names do not match: {sorted(missing)}")
            self.params = {}
            for name, val in params.items():
                arr = np.array(val, dtype=self.dtype)
                if arr.shape != shapes[name]:
                    raise ConfigurationError(
                        f"parameter {name} has shape {arr.shape}, expected {shapes[name]}"
                    )
                self.params[name] = arr
        else:
            self.params = self._init_params(seed)
        # causal mask: position p may attend to positions <= p only
        c = config.max_context
        self._mask = np.triu(np.full((c, c), MASK_VALUE, dtype=self.dtype), k=1)

    def _param_shapes(self) -> dict:
        cfg = self.config
        d, h, k, v, c = cfg.d_model, cfg.d_hidden, cfg.num_heads, cfg.vocab_size, cfg.max_context
        shapes = {"tok_emb": (v, d), "pos_emb": (c, d)}
        for layer in range(cfg.num_layers):
            p = f"l{layer}."
            shapes[p + "ln1.g"] = (d,)
            shapes[p + "ln1.b"] = (d,)
            shapes[p + "attn.wq"] = (d, d)
            shapes[p + "attn.wk"] = (d, d)
            shapes[p + "attn.wv"] = (d, d)
            shapes[p + "attn.wo"] = (d, d)
            shapes[p + "ln2.g"] = (d,)
            shapes[p + "ln2.b"] = (d,)
            shapes[p + "mlp.w1"] = (d, h)
            shapes[p + "mlp.b1"] = (h,)
            shapes[p + "mlp.w2"] = (h, d)
            shapes[p + "mlp.b2"] = (d,)
        shapes["lnf.g"] = (d,)
        shapes["lnf.b"] = (d,)
        shapes["ext.w1"] = (d, k * h)
        shapes["ext.b1"] = (k * h,)
        shapes["ext.w2"] = (k * h, k * d)
        shapes["ext.b2"] = (k * d,)
        shapes["proj.w"] = (d, v)
        return shapes

    def _init_params(self, seed: int) -> dict:
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in self._param_shapes().items():
            if name.endswith(".g"):
                arr = np.ones(shape)
            elif name.endswith((".b", ".b1", ".b2")):
                arr = np.zeros(shape)
            elif name in ("tok_emb", "pos_emb"):
                arr = rng.normal(scale=0.05, size=shape)
            else:
                bound = 1.0 / np.sqrt(shape[0])
                arr = rng.uniform(-bound, bound, size=shape)
            params[name] = arr.astype(self.dtype)
        return params

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def partition_names(self) -> dict:
        out = {part: [] for part in PARTITIONS}
        for name in sorted(self.params):
            out[partition_of(name)].append(name)
        return out

    def copy(self) -> "TinyBlockModel":
        return TinyBlockModel(
            self.config,
            dtype=self.dtype,
            params={k: v.copy() for k, v in self.params.items()},
        )

    # ---- forward passes ----

    def _pad(self, ids) -> np.ndarray:
        c = self.config.max_context
        if len(ids) > c:
            raise LengthError(f"sequence of {len(ids)} tokens exceeds context {c}")
        arr = np.zeros(c, dtype=np.int64)
        arr[: len(ids)] = ids
        return arr

    def _compose(self, input_tokens, prefix, candidates) -> tuple:
        ids = tuple(input_tokens) + (self.config.sep_token,) + tuple(prefix) + tuple(candidates)
        if any(not 0 <= t < self.vocab_size for t in ids):
            raise ConfigurationError("token id outside vocabulary")
        return ids

    def trunk_forward(self, ids_batch: np.ndarray, want_cache: bool = False):
        """Transformer trunk over padded id batches of shape (B, max_context).

        Returns the final layernormed hidden states (B, C, D) and, when
        requested, the intermediates needed for the backward pass.
        """
        p = self.params
        cfg = self.config
        x = p["tok_emb"][ids_batch] + p["pos_emb"][None, :, :]
        cache = {"ids": ids_batch, "x0": x} if want_cache else None
        scale = self.dtype.type(1.0 / np.sqrt(cfg.d_model))
        for layer in range(cfg.num_layers):
            pre = f"l{layer}."
            a, ln1c = _layernorm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
            q = a @ p[pre + "attn.wq"]
            k = a @ p[pre + "attn.wk"]
            v = a @ p[pre + "attn.wv"]
            scores = q @ k.transpose(0, 2, 1) * scale + self._mask[None, :, :]
            attn = _softmax(scores)
            ctx = attn @ v
            x2 = x + ctx @ p[pre + "attn.wo"]
            b, ln2c = _layernorm(x2, p[pre + "ln2.g"], p[pre + "ln2.b"])
            upre = b @ p[pre + "mlp.w1"] + p[pre + "mlp.b1"]
            u = np.maximum(upre, 0)
            x3 = x2 + u @ p[pre + "mlp.w2"] + p[pre + "mlp.b2"]
            if want_cache:
                cache[f"layer{layer}"] = {
                    "x": x, "a": a, "ln1": ln1c, "q": q, "k": k, "v": v,
                    "attn": attn, "ctx": ctx, "x2": x2, "b": b, "ln2": ln2c, "u": u,
                }
            x = x3
        hf, lnfc = _layernorm(x, p["lnf.g"], p["lnf.b"])
        if want_cache:
            cache["x_final"] = x
            cache["lnf"] = lnfc
            cache["hf"] = hf
        return hf, cache

    def extension_forward(self, hf: np.ndarray, head: int, want_cache: bool = False):
        """Logits of one head (1-indexed) at every position: (B, C, V)."""
        if not 1 <= head <= self.num_heads:
            raise ConfigurationError(f"head must be in [1, {self.num_heads}]")
        p = self.params
        d = self.config.d_model
        upre = hf @ p["ext.w1"] + p["ext.b1"]
        u = np.maximum(upre, 0)
        lo = (head - 1) * d
        o = u @ p["ext.w2"][:, lo : lo + d] + p["ext.b2"][lo : lo + d]
        y = o + hf
        logits = y @ p["proj.w"]
        cache = {"u": u, "y": y, "lo": lo} if want_cache else None
        return logits, cache

    def score_grid(self, input_tokens, prefix, candidates, k) -> BlockScores:
        """One padded forward pass scoring k heads at every candidate offset.

        Every array in this path has a shape fixed by the model config, never
        by the argument lengths, so identical conditioning contexts always
        reproduce bit-identical rows no matter how the grid is sliced.
        """
        self._check_heads(k)
        ids = self._compose(input_tokens, prefix, candidates)
        batch = self._pad(ids)[None, :]
        hf, _ = self.trunk_forward(batch)
        p = self.params
        cfg = self.config
        c, kk, d = cfg.max_context, cfg.num_heads, cfg.d_model
        flat = hf[0]  # (C, D)
        u = np.maximum(flat @ p["ext.w1"] + p["ext.b1"], 0)
        o = (u @ p["ext.w2"] + p["ext.b2"]).reshape(c, kk, d)
        y = o + flat[:, None, :]
        logits = (y.reshape(c * kk, d) @ p["proj.w"]).reshape(c, kk, -1)
        base = len(tuple(input_tokens)) + len(tuple(prefix))
        rows = len(tuple(candidates)) + 1
        grid = _log_softmax64(logits[base : base + rows, :k, :])
        return BlockScores(grid=grid, base_len=len(tuple(prefix)))


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy, g, cache):
    xhat, inv = cache
    n = xhat.shape[-1]
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _flat_grad(lhs, dy):
    """Weight gradient for y = lhs @ w summed over batch and position."""
    l2 = lhs.reshape(-1, lhs.shape[-1])
    d2 = dy.reshape(-1, dy.shape[-1])
    return l2.T @ d2


@dataclass
class TrainBatch:
    """Padded composed sequences ready for a train step.

    ids:         (B, max_context) int64, each row input + SEP + target + pad
    input_lens:  (B,) length of the raw input per row
    target_lens: (B,) length of the target per row, counting any end token
    """

    ids: np.ndarray
    input_lens: np.ndarray
    target_lens: np.ndarray

    @classmethod
    def from_pairs(cls, pairs, config: ModelConfig) -> "TrainBatch":
        """Compose (input_tokens, target_tokens) pairs into one padded batch.

        Targets should already carry their end token when the task uses one.
        """
        if not pairs:
            raise ConfigurationError("cannot build an empty batch")
        c = config.max_context
        ids = np.zeros((len(pairs), c), dtype=np.int64)
        input_lens = np.zeros(len(pairs), dtype=np.int64)
        target_lens = np.zeros(len(pairs), dtype=np.int64)
        for row, (inp, tgt) in enumerate(pairs):
            inp = tuple(int(t) for t in inp)
            tgt = tuple(int(t) for t in tgt)
            if not tgt:
                raise ConfigurationError("every training pair needs a non-empty target")
            composed = inp + (config.sep_token,) + tgt
            if any(not 0 <= t < config.vocab_size for t in composed):
                raise ConfigurationError("token id outside vocabulary")
            if len(composed) > c:
                raise LengthError(
                    f"composed sequence of {len(composed)} tokens exceeds context {c}"
                )
            ids[row, : len(composed)] = composed
            input_lens[row] = len(inp)
            target_lens[row] = len(tgt)
        return cls(ids=ids, input_lens=input_lens, target_lens=target_lens)

    def __len__(self):
        return self.ids.shape[0]


def _loss_positions(batch: TrainBatch, head: int, max_context: int):
    """Boolean mask of positions where head `head` has a target.

    Head h at position p predicts ids[p + h]. Valid p runs from the SEP
    (index input_len) through input_len + target_len - h.
    """
    pos = np.arange(max_context)[None, :]
    sep = batch.input_lens[:, None]
    last = batch.input_lens[:, None] + batch.target_lens[:, None] - head
    return (pos >= sep) & (pos <= last)


def _head_loss(model: TinyBlockModel, batch: TrainBatch, head: int, want_cache: bool):
    hf, trunk_cache = model.trunk_forward(batch.ids, want_cache=want_cache)
    logits, ext_cache = model.extension_forward(hf, head, want_cache=want_cache)
    mask = _loss_positions(batch, head, model.config.max_context)
    count = int(mask.sum())
    if count == 0:
        raise ConfigurationError(
            f"no training positions for head {head}; targets are shorter than the head offset"
        )
    rows, cols = np.nonzero(mask)
    targets = batch.ids[rows, cols + head]
    logprobs = _log_softmax64(logits[rows, cols])
    loss = float(-logprobs[np.arange(count), targets].mean())
    aux = (hf, trunk_cache, logits, ext_cache, rows, cols, targets, count)
    return loss, aux


def sub_loss(model: TinyBlockModel, batch: TrainBatch, head: int) -> float:
    """Mean cross-entropy of one head over its valid positions.

    Averaging sub_loss over a uniformly random head is an unbiased
    estimate of the mean of all per-head losses.
    """
    loss, _ = _head_loss(model, batch, head, want_cache=False)
    return loss


def loss_and_gradients(model: TinyBlockModel, batch: TrainBatch, head: int):
    """Sub-loss of one head and its gradient for every parameter."""
    loss, aux = _head_loss(model, batch, head, want_cache=True)
    hf, cache, logits, ext_cache, rows, cols, targets, count = aux
    p = model.params
    cfg = model.config
    grads = {}

    # cross-entropy at the masked positions, averaged
    dlogits = np.zeros_like(logits)
    probs = _softmax(logits[rows, cols].astype(np.float64))
    probs[np.arange(count), targets] -= 1.0
    dlogits[rows, cols] = (probs / count).astype(model.dtype)

    # vocabulary projection and head extension
    y, u, lo = ext_cache["y"], ext_cache["u"], ext_cache["lo"]
    grads["proj.w"] = _flat_grad(y, dlogits)
    dy = dlogits @ p["proj.w"].T
    dhf = dy.copy()  # residual into the head output
    w2_slice = p["ext.w2"][:, lo : lo + cfg.d_model]
    grads["ext.w2"] = np.zeros_like(p["ext.w2"])
    grads["ext.w2"][:, lo : lo + cfg.d_model] = _flat_grad(u, dy)
    grads["ext.b2"] = np.zeros_like(p["ext.b2"])
    grads["ext.b2"][lo : lo + cfg.d_model] = dy.sum(axis=(0, 1))
    du = dy @ w2_slice.T
    du *= u > 0
    grads["ext.w1"] = _flat_grad(hf, du)
    grads["ext.b1"] = du.sum(axis=(0, 1))
    dhf += du @ p["ext.w1"].T

    # trunk
    dx, dg, db = _layernorm_backward(dhf, p["lnf.g"], cache["lnf"])
    grads["lnf.g"], grads["lnf.b"] = dg, db
    scale = model.dtype.type(1.0 / np.sqrt(cfg.d_model))
    for layer in reversed(range(cfg.num_layers)):
        pre = f"l{layer}."
        lc = cache[f"layer{layer}"]
        # feedforward: x3 = x2 + relu(ln2(x2) @ w1 + b1) @ w2 + b2
        dmo = dx
        grads[pre + "mlp.w2"] = _flat_grad(lc["u"], dmo)
        grads[pre + "mlp.b2"] = dmo.sum(axis=(0, 1))
        dupre = dmo @ p[pre + "mlp.w2"].T
        dupre *= lc["u"] > 0
        grads[pre + "mlp.w1"] = _flat_grad(lc["b"], dupre)
        grads[pre + "mlp.b1"] = dupre.sum(axis=(0, 1))
        db_ = dupre @ p[pre + "mlp.w1"].T
        dx2, dg, db = _layernorm_backward(db_, p[pre + "ln2.g"], lc["ln2"])
        grads[pre + "ln2.g"], grads[pre + "ln2.b"] = dg, db
        dx2 += dx
        # attention: x2 = x + softmax(q k^T scale + mask) v wo
        dattn_out = dx2
        grads[pre + "attn.wo"] = _flat_grad(lc["ctx"], dattn_out)
        dctx = dattn_out @ p[pre + "attn.wo"].T
        dattn = dctx @ lc["v"].transpose(0, 2, 1)
        dv = lc["attn"].transpose(0, 2, 1) @ dctx
        a_ = lc["attn"]
        dscores = a_ * (dattn - (dattn * a_).sum(axis=-1, keepdims=True))
        dq = dscores @ lc["k"] * scale
        dk = dscores.transpose(0, 2, 1) @ lc["q"] * scale
        grads[pre + "attn.wq"] = _flat_grad(lc["a"], dq)
        grads[pre + "attn.wk"] = _flat_grad(lc["a"], dk)
        grads[pre + "attn.wv"] = _flat_grad(lc["a"], dv)
        da = dq @ p[pre + "attn.wq"].T + dk @ p[pre + "attn.wk"].T + dv @ p[pre + "attn.wv"].T
        dx_ln, dg, db = _layernorm_backward(da, p[pre + "ln1.g"], lc["ln1"])
        grads[pre + "ln1.g"], grads[pre + "ln1.b"] = dg, db
        dx = dx2 + dx_ln

    # embeddings
    grads["pos_emb"] = dx.sum(axis=0)
    dtok = np.zeros_like(p["tok_emb"])
    np.add.at(dtok, cache["ids"].reshape(-1), dx.reshape(-1, cfg.d_model))
    grads["tok_emb"] = dtok
    grads = {k: v.astype(model.dtype) for k, v in grads.items()}
    return loss, grads


def train_step(
    model: TinyBlockModel,
    batch: TrainBatch,
    head: int,
    learning_rate: float,
    freeze: FreezeMask = FreezeMask(),
    max_grad_norm: Optional[float] = None,
) -> float:
    """One SGD step on the sub-loss of a single head.

    Parameters in frozen partitions are left untouched. When max_grad_norm
    is set, the whole gradient is rescaled so its global L2 norm does not
    exceed it. Raises NumericError before applying any update if the loss
    is not finite.
    """
    if learning_rate <= 0:
        raise ConfigurationError("learning_rate must be positive")
    loss, grads = loss_and_gradients(model, batch, head)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite training loss {loss!r}")
    if max_grad_norm is not None:
        total = np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
        if total > max_grad_norm:
            factor = model.dtype.type(max_grad_norm / total)
            grads = {name: g * factor for name, g in grads.items()}
    lr = model.dtype.type(learning_rate)
    for name, grad in grads.items():
        if freeze.frozen(partition_of(name)):
            continue
        model.params[name] -= lr * grad
    return loss

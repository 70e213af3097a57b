"""Fusion transformer over text tokens and projected visual regions.

One self-attention stack consumes the sequence
``[CLS] w_1 .. w_L [SEP] r_1 .. r_K``: word embeddings for the text
segment, region features linearly projected into the same embedding
space for the image segment, plus position and segment embeddings. A
two-class head reads the CLS position. Forward and backward passes are
written out explicitly in numpy (float64) so every gradient coordinate
can be checked against finite differences; dropout is applied at the two
standard sites (embedding sum, feed-forward output) with inverted
scaling and is a pure function of the given seed.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import erf

from .features import FeatureStore

FusionParams = dict[str, np.ndarray]

PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<unk>", "<cls>", "<sep>")

_MASK_BIAS = 1e30
_LN_EPS = 1e-12
_CKPT_MAGIC = b"MFCK"
_CKPT_VERSION = 1


class ShapeError(ValueError):
    """Batch or parameter shapes inconsistent with the config."""


class CheckpointError(ValueError):
    """Raised for unreadable, corrupted, or unsupported checkpoint files."""


@dataclass(frozen=True)
class FusionConfig:
    """Shape hyperparameters of the fusion transformer."""

    vocab_size: int
    max_text_len: int
    n_regions: int
    region_dim: int
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 64
    dropout_rate: float = 0.10
    n_classes: int = 2

    def __post_init__(self) -> None:
        dims = (
            self.vocab_size,
            self.max_text_len,
            self.n_regions,
            self.region_dim,
            self.d_model,
            self.n_heads,
            self.n_layers,
            self.d_ff,
        )
        if any(v < 1 for v in dims):
            raise ValueError("all model dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.n_classes != 2:
            raise ValueError("only binary classification is supported")
        if self.vocab_size <= len(_SPECIALS):
            raise ValueError(f"vocab_size must exceed {len(_SPECIALS)} special tokens")

    @property
    def text_seq_len(self) -> int:
        """Length of the token-id segment: CLS + words + SEP."""
        return self.max_text_len + 2

    @property
    def seq_len(self) -> int:
        return 2 + self.max_text_len + self.n_regions


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocab:
    """Closed vocabulary: whitespace tokens, most frequent first, OOV -> UNK."""

    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if tuple(self.words[: len(_SPECIALS)]) != _SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> int:
        try:
            return self.words.index(word)  # pragma: no cover - shadowed by _index
        except ValueError:
            return UNK_ID

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"words": list(self.words)}), encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "Vocab":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return Vocab(words=tuple(obj["words"]))


def build_vocab(texts, vocab_size: int) -> Vocab:
    """Closed vocabulary of the ``vocab_size - 4`` most frequent words.

    Ties break alphabetically so the result is a deterministic function
    of the corpus.
    """
    counts: dict[str, int] = {}
    for text in texts:
        for word in text.split():
            counts[word] = counts.get(word, 0) + 1
    capacity = vocab_size - len(_SPECIALS)
    if capacity < 1:
        raise ValueError("vocab_size leaves no room for corpus words")
    ranked = sorted(counts, key=lambda w: (-counts[w], w))[:capacity]
    return Vocab(words=_SPECIALS + tuple(ranked))


def encode_text(vocab: Vocab, text: str, max_text_len: int) -> np.ndarray:
    """Token ids for one caption: truncated to ``max_text_len``, PAD-filled."""
    index = {w: i for i, w in enumerate(vocab.words)}
    ids = [index.get(w, UNK_ID) for w in text.split()[:max_text_len]]
    ids.extend([PAD_ID] * (max_text_len - len(ids)))
    return np.asarray(ids, dtype=np.int64)


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    """Model input: token ids (CLS text SEP), attention mask over the full
    sequence, region features, optional labels."""

    token_ids: np.ndarray
    mask: np.ndarray
    regions: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.token_ids.shape[0]


def make_batch(
    records,
    vocab: Vocab,
    store: FeatureStore,
    cfg: FusionConfig,
    with_labels: bool = True,
    ablation: str = "none",
) -> Batch:
    """Assemble a batch from records plus their stored features.

    ``ablation`` masks one modality for unimodal baselines: "text_only"
    zeroes and masks the region positions, "image_only" PADs and masks
    the word positions. CLS and SEP stay visible either way.
    """
    if ablation not in ("none", "text_only", "image_only"):
        raise ValueError(f"unknown ablation {ablation!r}")
    records = list(records)
    n = len(records)
    index = {w: i for i, w in enumerate(vocab.words)}
    token_ids = np.full((n, cfg.text_seq_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((n, cfg.seq_len), dtype=np.float64)
    regions = np.zeros((n, cfg.n_regions, cfg.region_dim), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64) if with_labels else None
    for i, rec in enumerate(records):
        words = rec.text.split()[: cfg.max_text_len]
        ids = [index.get(w, UNK_ID) for w in words]
        token_ids[i, 0] = CLS_ID
        token_ids[i, 1 : 1 + len(ids)] = ids
        token_ids[i, cfg.max_text_len + 1] = SEP_ID
        mask[i, 0] = 1.0
        mask[i, 1 : 1 + len(ids)] = 1.0
        mask[i, cfg.max_text_len + 1] = 1.0
        mask[i, cfg.text_seq_len :] = 1.0
        rf = store.get(rec.id)
        regions[i] = np.asarray(rf.regions, dtype=np.float64)
        if with_labels:
            if rec.label is None:
                raise ValueError(f"record {rec.id} is unlabeled")
            labels[i] = rec.label
    if ablation == "text_only":
        regions[:] = 0.0
        mask[:, cfg.text_seq_len :] = 0.0
    elif ablation == "image_only":
        token_ids[:, 1 : cfg.max_text_len + 1] = PAD_ID
        mask[:, 1 : cfg.max_text_len + 1] = 0.0
    return Batch(token_ids=token_ids, mask=mask, regions=regions, labels=labels)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

HEAD_PARAM_NAMES = ("cls_w", "cls_b")


def param_shapes(cfg: FusionConfig) -> dict[str, tuple[int, ...]]:
    """Canonical tensor name -> shape map; also fixes iteration order."""
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, cfg.d_model),
        "pos_emb": (cfg.seq_len, cfg.d_model),
        "seg_emb": (2, cfg.d_model),
        "vis_w": (cfg.region_dim, cfg.d_model),
        "vis_b": (cfg.d_model,),
    }
    for i in range(cfg.n_layers):
        prefix = f"l{i}."
        for name in ("attn_q", "attn_k", "attn_v", "attn_o"):
            shapes[prefix + name + "_w"] = (cfg.d_model, cfg.d_model)
            shapes[prefix + name + "_b"] = (cfg.d_model,)
        shapes[prefix + "ln1_g"] = (cfg.d_model,)
        shapes[prefix + "ln1_b"] = (cfg.d_model,)
        shapes[prefix + "ff1_w"] = (cfg.d_model, cfg.d_ff)
        shapes[prefix + "ff1_b"] = (cfg.d_ff,)
        shapes[prefix + "ff2_w"] = (cfg.d_ff, cfg.d_model)
        shapes[prefix + "ff2_b"] = (cfg.d_model,)
        shapes[prefix + "ln2_g"] = (cfg.d_model,)
        shapes[prefix + "ln2_b"] = (cfg.d_model,)
    shapes["cls_w"] = (cfg.d_model, cfg.n_classes)
    shapes["cls_b"] = (cfg.n_classes,)
    return shapes


def init_params(cfg: FusionConfig, seed: int = 0) -> FusionParams:
    """Symmetric uniform init scaled by 1/sqrt(fan_in).

    Embedding tables use d_model as fan-in; layer-norm starts at
    scale 1 / offset 0; biases at zero.
    """
    rng = np.random.default_rng(seed)
    params: FusionParams = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("ln1_g") or name.endswith("ln2_g"):
            params[name] = np.ones(shape)
        elif name.endswith("_b") and "ln" not in name:
            params[name] = np.zeros(shape)
        elif name.endswith("ln1_b") or name.endswith("ln2_b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = cfg.d_model if name.endswith("emb") else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def zeros_like_params(params: FusionParams) -> FusionParams:
    return {name: np.zeros_like(value) for name, value in params.items()}


def clone_params(params: FusionParams) -> FusionParams:
    return {name: value.copy() for name, value in params.items()}


def check_params(params: FusionParams, cfg: FusionConfig) -> None:
    """Validate shapes against the config and finiteness of every tensor."""
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        missing = set(expected) - set(params)
        extra = set(params) - set(expected)
        raise ShapeError(f"parameter names mismatch (missing={sorted(missing)}, extra={sorted(extra)})")
    for name, value in params.items():
        if value.shape != expected[name]:
            raise ShapeError(f"{name}: shape {value.shape}, expected {expected[name]}")
        if not np.all(np.isfinite(value)):
            raise ValueError(f"{name}: non-finite values")


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = np.mean(x, axis=-1, keepdims=True)
    var = np.var(x, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, xhat, inv


def _layer_norm_backward(dy: np.ndarray, xhat: np.ndarray, inv: np.ndarray, g: np.ndarray):
    dg = np.sum(dy * xhat, axis=(0, 1))
    db = np.sum(dy, axis=(0, 1))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - np.mean(dxhat, axis=-1, keepdims=True)
        - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    n, s, d = x.shape
    return x.reshape(n, s, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    n, h, s, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(n, s, h * dh)


def _check_batch(batch: Batch, cfg: FusionConfig) -> None:
    n = batch.token_ids.shape[0]
    if batch.token_ids.shape != (n, cfg.text_seq_len):
        raise ShapeError(f"token_ids shape {batch.token_ids.shape}, expected ({n}, {cfg.text_seq_len})")
    if batch.mask.shape != (n, cfg.seq_len):
        raise ShapeError(f"mask shape {batch.mask.shape}, expected ({n}, {cfg.seq_len})")
    if batch.regions.shape != (n, cfg.n_regions, cfg.region_dim):
        raise ShapeError(
            f"regions shape {batch.regions.shape}, expected ({n}, {cfg.n_regions}, {cfg.region_dim})"
        )
    if np.any(batch.token_ids < 0) or np.any(batch.token_ids >= cfg.vocab_size):
        raise ShapeError("token id outside vocabulary")


def forward(
    batch: Batch,
    params: FusionParams,
    cfg: FusionConfig,
    mode: str = "eval",
    dropout_seed: int = 0,
) -> tuple[np.ndarray, dict]:
    """Run the stack; returns (logits, cache for the backward pass).

    Eval mode is deterministic and applies no dropout. Train mode draws
    dropout masks from ``dropout_seed`` with inverted scaling, so eval
    needs no rescale and the sampled loss is an exact function of
    (batch, params, seed).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_batch(batch, cfg)
    n = len(batch)
    text_len = cfg.text_seq_len
    rng = np.random.default_rng(dropout_seed) if mode == "train" else None
    p_drop = cfg.dropout_rate if mode == "train" else 0.0

    def dropout_mask(shape):
        if rng is None or p_drop == 0.0:
            return None
        return (rng.random(shape) >= p_drop) / (1.0 - p_drop)

    emb = params["tok_emb"][batch.token_ids]
    vis = batch.regions @ params["vis_w"] + params["vis_b"]
    x = np.concatenate([emb, vis], axis=1) + params["pos_emb"][None, :, :]
    x[:, :text_len, :] += params["seg_emb"][0]
    x[:, text_len:, :] += params["seg_emb"][1]

    emb_mask = dropout_mask(x.shape)
    if emb_mask is not None:
        x = x * emb_mask

    key_bias = (batch.mask[:, None, None, :] - 1.0) * _MASK_BIAS
    scale = 1.0 / np.sqrt(cfg.d_model // cfg.n_heads)
    cache: dict = {"batch": batch, "emb_mask": emb_mask, "x0": x, "layers": []}

    for i in range(cfg.n_layers):
        p = f"l{i}."
        x_in = x
        q = _split_heads(x_in @ params[p + "attn_q_w"] + params[p + "attn_q_b"], cfg.n_heads)
        k = _split_heads(x_in @ params[p + "attn_k_w"] + params[p + "attn_k_b"], cfg.n_heads)
        v = _split_heads(x_in @ params[p + "attn_v_w"] + params[p + "attn_v_b"], cfg.n_heads)
        scores = scale * (q @ k.transpose(0, 1, 3, 2)) + key_bias
        probs = _softmax(scores)
        ctx = _merge_heads(probs @ v)
        attn_out = ctx @ params[p + "attn_o_w"] + params[p + "attn_o_b"]
        x1, xhat1, inv1 = _layer_norm(x_in + attn_out, params[p + "ln1_g"], params[p + "ln1_b"])
        f1 = x1 @ params[p + "ff1_w"] + params[p + "ff1_b"]
        a = _gelu(f1)
        f2 = a @ params[p + "ff2_w"] + params[p + "ff2_b"]
        ffn_mask = dropout_mask(f2.shape)
        f2d = f2 * ffn_mask if ffn_mask is not None else f2
        x, xhat2, inv2 = _layer_norm(x1 + f2d, params[p + "ln2_g"], params[p + "ln2_b"])
        cache["layers"].append(
            {
                "x_in": x_in, "q": q, "k": k, "v": v, "probs": probs, "ctx": ctx,
                "xhat1": xhat1, "inv1": inv1, "x1": x1, "f1": f1, "a": a,
                "ffn_mask": ffn_mask, "xhat2": xhat2, "inv2": inv2,
            }
        )

    cache["x_final"] = x
    logits = x[:, 0, :] @ params["cls_w"] + params["cls_b"]
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    return logits, cache


def _linear_grads(x: np.ndarray, dy: np.ndarray, w: np.ndarray):
    dw = np.einsum("nsi,nso->io", x, dy)
    db = np.sum(dy, axis=(0, 1))
    dx = dy @ w.T
    return dx, dw, db


def _backward(dlogits: np.ndarray, cache: dict, params: FusionParams, cfg: FusionConfig) -> FusionParams:
    batch: Batch = cache["batch"]
    n = len(batch)
    text_len = cfg.text_seq_len
    scale = 1.0 / np.sqrt(cfg.d_model // cfg.n_heads)
    grads = zeros_like_params(params)

    x_final = cache["x_final"]
    grads["cls_w"] = x_final[:, 0, :].T @ dlogits
    grads["cls_b"] = np.sum(dlogits, axis=0)
    dx = np.zeros_like(x_final)
    dx[:, 0, :] = dlogits @ params["cls_w"].T

    for i in reversed(range(cfg.n_layers)):
        p = f"l{i}."
        c = cache["layers"][i]
        dr2, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layer_norm_backward(
            dx, c["xhat2"], c["inv2"], params[p + "ln2_g"]
        )
        dx1 = dr2.copy()
        df2 = dr2 * c["ffn_mask"] if c["ffn_mask"] is not None else dr2
        da, grads[p + "ff2_w"], grads[p + "ff2_b"] = _linear_grads(c["a"], df2, params[p + "ff2_w"])
        df1 = da * _gelu_grad(c["f1"])
        dx1_ff, grads[p + "ff1_w"], grads[p + "ff1_b"] = _linear_grads(c["x1"], df1, params[p + "ff1_w"])
        dx1 += dx1_ff
        dr1, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layer_norm_backward(
            dx1, c["xhat1"], c["inv1"], params[p + "ln1_g"]
        )
        dx_in = dr1.copy()
        dctx, grads[p + "attn_o_w"], grads[p + "attn_o_b"] = _linear_grads(
            c["ctx"], dr1, params[p + "attn_o_w"]
        )
        dctx_h = _split_heads(dctx, cfg.n_heads)
        dprobs = dctx_h @ c["v"].transpose(0, 1, 3, 2)
        dv = c["probs"].transpose(0, 1, 3, 2) @ dctx_h
        dscores = c["probs"] * (dprobs - np.sum(dprobs * c["probs"], axis=-1, keepdims=True))
        dq = scale * (dscores @ c["k"])
        dk = scale * (dscores.transpose(0, 1, 3, 2) @ c["q"])
        for name, dhead in (("attn_q", dq), ("attn_k", dk), ("attn_v", dv)):
            dflat = _merge_heads(dhead)
            dx_proj, grads[p + name + "_w"], grads[p + name + "_b"] = _linear_grads(
                c["x_in"], dflat, params[p + name + "_w"]
            )
            dx_in += dx_proj
        dx = dx_in

    emb_mask = cache["emb_mask"]
    dx0 = dx * emb_mask if emb_mask is not None else dx
    grads["pos_emb"] = np.sum(dx0, axis=0)
    grads["seg_emb"][0] = np.sum(dx0[:, :text_len, :], axis=(0, 1))
    grads["seg_emb"][1] = np.sum(dx0[:, text_len:, :], axis=(0, 1))
    np.add.at(grads["tok_emb"], batch.token_ids, dx0[:, :text_len, :])
    dvis = dx0[:, text_len:, :]
    grads["vis_w"] = np.einsum("nki,nko->io", batch.regions, dvis)
    grads["vis_b"] = np.sum(dvis, axis=(0, 1))
    return grads


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_z
    n = logits.shape[0]
    loss = -float(np.mean(log_probs[np.arange(n), labels]))
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def loss_and_grad(
    batch: Batch, params: FusionParams, cfg: FusionConfig, dropout_seed: int = 0
) -> tuple[float, FusionParams]:
    """Mean cross-entropy over the batch plus exact gradients.

    Gradients are exact for the dropout masks sampled from
    ``dropout_seed``; re-running with the same seed reproduces both.
    """
    if batch.labels is None:
        raise ValueError("loss requires labels")
    logits, cache = forward(batch, params, cfg, mode="train", dropout_seed=dropout_seed)
    loss, dlogits = cross_entropy(logits, batch.labels)
    return loss, _backward(dlogits, cache, params, cfg)


def predict_logits(batch: Batch, params: FusionParams, cfg: FusionConfig) -> np.ndarray:
    logits, _ = forward(batch, params, cfg, mode="eval")
    return logits


def predict_proba(
    records,
    params: FusionParams,
    cfg: FusionConfig,
    vocab: Vocab,
    store: FeatureStore,
    batch_size: int = 128,
    ablation: str = "none",
) -> np.ndarray:
    """Probability of the hateful class per record, in input order.

    Deterministic (eval mode); raises if any record lacks stored
    features.
    """
    records = list(records)
    out = np.zeros(len(records), dtype=np.float64)
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        batch = make_batch(chunk, vocab, store, cfg, with_labels=False, ablation=ablation)
        logits = predict_logits(batch, params, cfg)
        out[start : start + len(chunk)] = _softmax(logits)[:, 1]
    return out


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str | Path, params: FusionParams, cfg: FusionConfig) -> None:
    """Binary checkpoint: version, config JSON, named float32 tensors, CRC32."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    payload = bytearray()
    payload += _CKPT_MAGIC
    payload += struct.pack("<HI", _CKPT_VERSION, len(header))
    payload += header
    payload += struct.pack("<I", len(params))
    for name, value in params.items():
        encoded = name.encode("utf-8")
        payload += struct.pack("<H", len(encoded))
        payload += encoded
        payload += struct.pack("<B", value.ndim)
        payload += struct.pack(f"<{value.ndim}I", *value.shape)
        payload += value.astype("<f4").tobytes()
    payload += struct.pack("<I", zlib.crc32(bytes(payload)))
    path.write_bytes(bytes(payload))


def load_checkpoint(path: str | Path) -> tuple[FusionParams, FusionConfig]:
    data = Path(path).read_bytes()
    if len(data) < 14 or data[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"not a checkpoint file: {path}")
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CheckpointError(f"checkpoint checksum mismatch: {path}")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != _CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    offset = 10
    cfg = FusionConfig(**json.loads(data[offset : offset + header_len].decode("utf-8")))
    offset += header_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    params: FusionParams = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        value = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
        params[name] = value.astype(np.float64)
    check_params(params, cfg)
    return params, cfg

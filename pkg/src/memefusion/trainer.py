"""Training loop: Adam with warmup schedules and split learning rates.

The classifier head trains at the base learning rate while the backbone
(everything else) trains at ``base_lr * backbone_lr_ratio``. Schedules
ramp linearly over the warmup steps, then decay to zero by the final
step, either linearly or on a half-cosine. All randomness (init, batch
order, dropout) derives from the config seed, so a run is reproducible
down to checkpoint bytes.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .features import FeatureStore
from .metrics import EvalResult, evaluate
from .model import (
    Batch,
    FusionConfig,
    FusionParams,
    Vocab,
    build_vocab,
    init_params,
    loss_and_grad,
    make_batch,
    predict_proba,
    save_checkpoint,
)

SCHEDULES = ("warmup_linear", "warmup_cosine")

_DOMAIN_INIT = 10
_DOMAIN_BATCH = 11
_DOMAIN_DROPOUT = 12


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    total_steps: int = 3000
    warmup_steps: int = 2000
    schedule: str = "warmup_linear"
    batch_size: int = 32
    base_lr: float = 5e-5
    backbone_lr_ratio: float = 0.3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    eval_every: int = 0
    checkpoint_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be positive")
        if self.warmup_steps >= self.total_steps:
            raise ValueError(
                f"warmup_steps={self.warmup_steps} must be below total_steps={self.total_steps}"
            )
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.base_lr < 0 or self.backbone_lr_ratio < 0:
            raise ValueError("learning rates must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.eval_every < 0:
            raise ValueError("eval_every must be non-negative")
        if self.warmup_steps > self.total_steps // 2:
            warnings.warn(
                f"warmup covers {self.warmup_steps}/{self.total_steps} steps, "
                "more than half the run",
                stacklevel=2,
            )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True), encoding="utf-8")

    @staticmethod
    def from_json(path: str | Path) -> "TrainConfig":
        return TrainConfig(**json.loads(Path(path).read_text(encoding="utf-8")))


def lr_multiplier(step: int, cfg: TrainConfig) -> float:
    """Schedule multiplier at a step (0 = before training).

    Ramps t/w during warmup, hits 1.0 exactly at step w, then decays to
    exactly 0.0 at the final step: linearly as (T-t)/(T-w), or as the
    half-cosine 0.5*(1+cos(pi*(t-w)/(T-w))).
    """
    if not (0 <= step <= cfg.total_steps):
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if step == cfg.total_steps:
        return 0.0
    if step == cfg.warmup_steps:
        return 1.0
    t, w, total = float(step), float(cfg.warmup_steps), float(cfg.total_steps)
    if step < cfg.warmup_steps:
        return t / w
    if cfg.schedule == "warmup_linear":
        return (total - t) / (total - w)
    return float(0.5 * (1.0 + np.cos(np.pi * (t - w) / (total - w))))


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: FusionParams
    v: FusionParams
    t: int = 0

    @staticmethod
    def init(params: FusionParams) -> "AdamState":
        return AdamState(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: FusionParams,
    grads: FusionParams,
    state: AdamState,
    lr_by_param: dict[str, float],
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place, with per-tensor rates."""
    if set(params) != set(grads) or set(params) != set(lr_by_param):
        raise ValueError("params, grads and lr_by_param must share keys")
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr_by_param[name] * m_hat / (np.sqrt(v_hat) + eps)


def head_backbone_lr(step: int, cfg: TrainConfig) -> tuple[float, float]:
    """Effective (head, backbone) learning rates at a step."""
    mult = lr_multiplier(step, cfg)
    head = cfg.base_lr * mult
    return head, head * cfg.backbone_lr_ratio


@dataclass
class TrainReport:
    """Per-step loss/learning-rate trace plus evaluation history."""

    losses: list = field(default_factory=list)
    head_lrs: list = field(default_factory=list)
    backbone_lrs: list = field(default_factory=list)
    eval_history: list = field(default_factory=list)
    final_eval: Optional[EvalResult] = None
    wall_time_s: float = 0.0

    def loss_csv(self, path: str | Path) -> None:
        lines = ["step,loss,lr_head,lr_backbone"]
        for i, loss in enumerate(self.losses):
            lines.append(f"{i + 1},{loss:.10g},{self.head_lrs[i]:.10g},{self.backbone_lrs[i]:.10g}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class _BatchStream:
    """Endless stream of fixed-size index batches.

    Each pass over the data uses a fresh permutation; a short tail is
    topped up from the next permutation so every batch has exactly
    ``batch_size`` rows.
    """

    def __init__(self, n: int, batch_size: int, seed_seq: np.random.SeedSequence):
        if n < 1:
            raise ValueError("empty training set")
        self._n = n
        self._batch_size = batch_size
        self._rng = np.random.default_rng(seed_seq)
        self._queue: list[int] = []

    def next_batch(self) -> np.ndarray:
        while len(self._queue) < self._batch_size:
            self._queue.extend(self._rng.permutation(self._n).tolist())
        out = self._queue[: self._batch_size]
        del self._queue[: self._batch_size]
        return np.asarray(out, dtype=np.int64)


def train(
    records,
    store: FeatureStore,
    model_cfg: FusionConfig,
    train_cfg: TrainConfig,
    vocab: Optional[Vocab] = None,
    dev_records=None,
    log_every: int = 0,
    ablation: str = "none",
) -> tuple[FusionParams, Vocab, TrainReport]:
    """Train the fusion model on labeled records.

    Returns the final parameters, the vocabulary used (built from the
    training captions when not supplied), and the report. ``ablation``
    trains a unimodal baseline by masking the other modality in every
    batch (evaluation inside the loop masks the same way). When the
    config names a checkpoint path the parameters are saved there with
    the vocabulary in a ``.vocab.json`` sidecar.
    """
    records = list(records)
    if any(r.label is None for r in records):
        raise ValueError("training records must all carry labels")
    if vocab is None:
        vocab = build_vocab((r.text for r in records), model_cfg.vocab_size)
    started = time.monotonic()

    init_seed = np.random.SeedSequence((_DOMAIN_INIT, train_cfg.seed)).generate_state(1)[0]
    params = init_params(model_cfg, seed=int(init_seed))
    state = AdamState.init(params)
    stream = _BatchStream(
        len(records),
        train_cfg.batch_size,
        np.random.SeedSequence((_DOMAIN_BATCH, train_cfg.seed)),
    )
    report = TrainReport()

    for step in range(1, train_cfg.total_steps + 1):
        idx = stream.next_batch()
        batch = make_batch([records[i] for i in idx], vocab, store, model_cfg, ablation=ablation)
        drop_seed = np.random.SeedSequence((_DOMAIN_DROPOUT, train_cfg.seed, step)).generate_state(1)[0]
        loss, grads = loss_and_grad(batch, params, model_cfg, dropout_seed=int(drop_seed))
        head_lr, backbone_lr = head_backbone_lr(step, train_cfg)
        lr_by_param = {
            name: head_lr if name in ("cls_w", "cls_b") else backbone_lr for name in params
        }
        adam_step(
            params, grads, state, lr_by_param,
            beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps,
        )
        report.losses.append(loss)
        report.head_lrs.append(head_lr)
        report.backbone_lrs.append(backbone_lr)
        if log_every and step % log_every == 0:
            print(f"step {step}/{train_cfg.total_steps} loss {loss:.4f}")
        if train_cfg.eval_every and dev_records is not None and step % train_cfg.eval_every == 0:
            result = evaluate_model(dev_records, params, model_cfg, vocab, store, ablation=ablation)
            report.eval_history.append((step, result.accuracy, result.auroc))

    if dev_records is not None:
        report.final_eval = evaluate_model(dev_records, params, model_cfg, vocab, store, ablation=ablation)
    report.wall_time_s = time.monotonic() - started

    if train_cfg.checkpoint_path:
        ckpt = Path(train_cfg.checkpoint_path)
        save_checkpoint(ckpt, params, model_cfg)
        vocab.save(ckpt.with_suffix(".vocab.json"))
    return params, vocab, report


def evaluate_model(
    records,
    params: FusionParams,
    cfg: FusionConfig,
    vocab: Vocab,
    store: FeatureStore,
    ablation: str = "none",
) -> EvalResult:
    """Accuracy and AUROC of the model on labeled records."""
    records = list(records)
    if any(r.label is None for r in records):
        raise ValueError("evaluation records must all carry labels")
    scores = predict_proba(records, params, cfg, vocab, store, ablation=ablation)
    labels = np.asarray([r.label for r in records], dtype=np.int64)
    return evaluate(scores, labels)

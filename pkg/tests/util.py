"""Shared test fixtures: micro batches, tiny corpora, reference oracles."""

from __future__ import annotations

import numpy as np

from memefusion.corpus import MemeRecord, RecordSet
from memefusion.model import CLS_ID, PAD_ID, SEP_ID, Batch, FusionConfig


def micro_config(**overrides) -> FusionConfig:
    """The small fusion shape used for exhaustive gradient checks."""
    base = dict(
        vocab_size=32,
        max_text_len=4,
        n_regions=4,
        region_dim=16,
        d_model=8,
        n_heads=2,
        n_layers=2,
        d_ff=16,
        dropout_rate=0.1,
    )
    base.update(overrides)
    return FusionConfig(**base)


def random_batch(cfg: FusionConfig, n: int, seed: int, with_labels: bool = True) -> Batch:
    """Well-formed random batch: CLS + 1..L words + SEP + regions."""
    rng = np.random.default_rng(seed)
    L = cfg.max_text_len
    tok = np.full((n, cfg.text_seq_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((n, cfg.seq_len), dtype=np.float64)
    for i in range(n):
        n_words = int(rng.integers(1, L + 1))
        tok[i, 0] = CLS_ID
        tok[i, 1 : 1 + n_words] = rng.integers(4, cfg.vocab_size, size=n_words)
        tok[i, L + 1] = SEP_ID
        mask[i, 0] = 1.0
        mask[i, 1 : 1 + n_words] = 1.0
        mask[i, L + 1] = 1.0
        mask[i, cfg.text_seq_len :] = 1.0
    regions = rng.normal(size=(n, cfg.n_regions, cfg.region_dim))
    labels = rng.integers(0, 2, size=n) if with_labels else None
    return Batch(token_ids=tok, mask=mask, regions=regions, labels=labels)


def auroc_brute_force(scores, labels) -> float:
    """All-pairs oracle: P(score_pos > score_neg) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def make_records(n: int, source: str = "hm_train", label=1, id_start: int = 0) -> RecordSet:
    """Paper-shaped fixture records (content irrelevant, counts matter)."""
    records = [
        MemeRecord(
            id=id_start + i,
            img=f"img/{id_start + i:07d}.bin",
            text=f"w{i % 7} w{(i + 1) % 5}",
            label=label if not callable(label) else label(i),
            source=source,
            confidence=0.999 if source == "pseudo" else None,
        )
        for i in range(n)
    ]
    return RecordSet(records, name=source)

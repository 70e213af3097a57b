#!/usr/bin/env python3
"""
Why fusion matters: the confounder gap
======================================

Benign confounders are pairs where one modality of a hateful meme is
swapped so the result is harmless. A classifier that only reads the
caption (or only the image) cannot separate those from the real thing;
a model that fuses both can. This demo trains the same transformer
three times on the same corpus with the same budget: full fusion, a
text-only ablation, and an image-only ablation, then compares test
accuracy.

Takes roughly half a minute on one core.

Run it:  python3 demos/02_fusion_vs_unimodal.py
"""

import time

from memefusion.features import FeatureConfig, FeatureStore, extract_batch
from memefusion.model import FusionConfig
from memefusion.synth import SynthSpec, generate_corpus
from memefusion.trainer import TrainConfig, evaluate_model, train

# ---------------------------------------------------------------------------
# Data and features
# ---------------------------------------------------------------------------

spec = SynthSpec(n_train=1200, n_dev=0, n_test=300, noise=0.1, seed=42)
corpus = generate_corpus(spec)

# Region features: pool the image over a 2x2 grid; each cell becomes a
# 16-dim vector of summary stats plus its position in the frame.
feat_cfg = FeatureConfig(n_regions=4, region_dim=16)
features, skipped = extract_batch(sorted(corpus.images.items()), feat_cfg)
assert not skipped
store = FeatureStore.from_features(features, feat_cfg.n_regions, feat_cfg.region_dim)
print(f"{len(corpus.train)} train / {len(corpus.test)} test records, features for {len(store)} images")

# ---------------------------------------------------------------------------
# One model, three diets
# ---------------------------------------------------------------------------
# The ablations do not change the architecture: they mask out the other
# modality in every batch, so caption tokens (or image regions) simply
# never reach attention.

model_cfg = FusionConfig(
    vocab_size=72, max_text_len=8, n_regions=4, region_dim=16,
    d_model=32, n_heads=2, n_layers=2, d_ff=64, dropout_rate=0.1,
)
train_cfg = TrainConfig(
    total_steps=1200, warmup_steps=120, schedule="warmup_cosine",
    batch_size=32, base_lr=2e-3, backbone_lr_ratio=1.0, seed=7,
)

results = {}
for ablation in ("none", "text_only", "image_only"):
    started = time.monotonic()
    params, vocab, report = train(corpus.train, store, model_cfg, train_cfg, ablation=ablation)
    result = evaluate_model(corpus.test, params, model_cfg, vocab, store, ablation=ablation)
    results[ablation] = result
    label = "fusion" if ablation == "none" else ablation
    print(
        f"{label:11s}  final loss {report.losses[-1]:.3f}  "
        f"test acc {result.accuracy:.3f}  auroc {result.auroc:.3f}  "
        f"({time.monotonic() - started:.0f}s)"
    )

# ---------------------------------------------------------------------------
# The gap
# ---------------------------------------------------------------------------

fusion = results["none"].accuracy
print(f"\nfusion beats text-only by {fusion - results['text_only'].accuracy:+.3f} accuracy")
print(f"fusion beats image-only by {fusion - results['image_only'].accuracy:+.3f} accuracy")
print("\nthe unimodal models hover near chance: the confounders are built so that")
print("each single modality carries (almost) no signal about the label on its own")

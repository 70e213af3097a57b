#!/usr/bin/env python3
"""
The four-stage pseudo-labeling experiment
=========================================

The pipeline grows its training metadata in stages:

  S0_baseline   labeled training set only
  S1_manual     + a held-out slice of dev + a small manually labeled set
  S2_pseudo     + unlabeled pool records whose model confidence cleared
                  a two-tail threshold (>= tau_pos or <= tau_neg)
  S3_filtered   + only the pseudo-labeled positives that survive review

Every stage retrains from scratch for each configured model and lands
in one report row; a count ledger audits what went into each stage.
This demo runs the whole thing at desk scale with one small model.

Takes roughly half a minute on one core.

Run it:  python3 demos/03_pseudo_label_stages.py
"""

import warnings

from memefusion.engine import ExperimentConfig, run_experiment
from memefusion.synth import SynthSpec
from memefusion.trainer import TrainConfig

warnings.filterwarnings("ignore", category=UserWarning)

# ---------------------------------------------------------------------------
# Configure a small run
# ---------------------------------------------------------------------------
# The pool is deliberately larger than the labeled set, and 2% of its
# texts are corrupted so the cleaning pass has something to reject.

exp = ExperimentConfig(
    spec=SynthSpec(n_train=200, n_dev=80, n_test=80, noise=0.1, seed=3),
    n_manual=40,          # manually labeled records added in S1
    n_pool=200,           # unlabeled pool to pseudo-label
    n_dev_to_train=16,    # dev slice folded into training at S1
    train_cfgs={
        "model_1": TrainConfig(
            total_steps=500, warmup_steps=100, schedule="warmup_linear",
            batch_size=32, base_lr=3e-3, backbone_lr_ratio=0.3, seed=1,
        ),
    },
    tau_pos=0.995,
    tau_neg=0.005,
    pool_irregular_frac=0.02,
)

report = run_experiment(exp, stages=("S0", "S1", "S2", "S3"), log=print)

# ---------------------------------------------------------------------------
# Read the results
# ---------------------------------------------------------------------------

print()
print(report.to_text())

print("stage composition ledgers:")
for stage, ledger in report.ledgers.items():
    print(f"  {stage:12s} total={ledger.total:4d}  {dict(ledger.by_source)}")

print(
    f"\npool: {report.pool_total} raw -> {report.pool_valid} valid "
    f"({report.pool_rejected} irregular texts rejected)"
)
print(
    f"selected {report.n_selected} pseudo-labels at thresholds "
    f"[{exp.tau_neg}, {exp.tau_pos}]; review kept {report.n_accepted}"
)
print(f"pseudo-labels came from {report.pseudo_model} (best validation auroc)")

# The identity every run must satisfy: S2 is exactly S1 plus the
# selected candidates, S3 exactly S1 plus the reviewed survivors.
s1 = report.ledgers["S1_manual"].total
assert report.ledgers["S2_pseudo"].total == s1 + report.n_selected
assert report.ledgers["S3_filtered"].total == s1 + report.n_accepted
print("\nledger identities hold: |S2| = |S1| + selected, |S3| = |S1| + accepted")

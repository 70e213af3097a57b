"""Pseudo-label loop and four-stage experiment orchestration.

Stages compose training metadata incrementally: S0 is the base training
split; S1 adds the dev remainder and the manually labeled extras; S2
adds every confidence-filtered pseudo-label (strongly augmented); S3
replaces the pseudo set with the human-accepted subset of the positive
candidates. Pseudo-labels come from whichever S1-trained model scores
the higher validation AUROC. Every stage/model pair is trained from
scratch and evaluated on the held-out validation and test splits.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .augment import augment_set
from .corpus import (
    CountLedger,
    MemeRecord,
    MetadataError,
    RecordSet,
    compose_training_metadata,
    concat,
    strip_labels,
    validate_text,
    write_metadata,
)
from .features import FeatureConfig, FeatureStore, extract_batch
from .metrics import EvalResult
from .model import FusionConfig, predict_proba, save_checkpoint
from .synth import SynthCorpus, SynthSpec, generate_corpus
from .trainer import TrainConfig, TrainReport, evaluate_model, train

STAGES = ("S0_baseline", "S1_manual", "S2_pseudo", "S3_filtered")
_STAGE_ALIASES = {"S0": "S0_baseline", "S1": "S1_manual", "S2": "S2_pseudo", "S3": "S3_filtered"}

TAU_POS_DEFAULT = 0.995
TAU_NEG_DEFAULT = 0.005

_DOMAIN_AUX = 4
_DOMAIN_IRREGULAR = 5


def resolve_stage(stage: str) -> str:
    full = _STAGE_ALIASES.get(stage, stage)
    if full not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return full


@dataclass(frozen=True)
class PseudoCandidate:
    """One pool record whose model confidence cleared a threshold."""

    record_id: int
    confidence: float
    assigned_label: int
    text: str = ""
    img: str = ""
    stage: str = "S2_pseudo"

    def __post_init__(self) -> None:
        if isinstance(self.record_id, bool) or self.record_id < 0:
            raise ValueError(f"record_id must be a non-negative int, got {self.record_id!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.assigned_label not in (0, 1):
            raise ValueError(f"assigned_label must be 0 or 1, got {self.assigned_label}")


def filter_pseudo(
    pool_probas: Mapping[int, float],
    tau_pos: float = TAU_POS_DEFAULT,
    tau_neg: float = TAU_NEG_DEFAULT,
    pool: Optional[RecordSet] = None,
) -> list[PseudoCandidate]:
    """Two-tail confidence selection over pool probabilities.

    Probability >= tau_pos assigns label 1, <= tau_neg assigns label 0
    (both boundaries inclusive); everything strictly between is
    excluded. Output is sorted by record id, so the result does not
    depend on mapping iteration order. When the pool record set is
    given, candidates carry its text and image refs.
    """
    if not (0.0 <= tau_neg < tau_pos <= 1.0):
        raise ValueError(f"need 0 <= tau_neg < tau_pos <= 1, got tau_neg={tau_neg}, tau_pos={tau_pos}")
    out: list[PseudoCandidate] = []
    for record_id in sorted(pool_probas):
        p = float(pool_probas[record_id])
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"probability {p} for id {record_id} outside [0, 1]")
        if p >= tau_pos:
            label = 1
        elif p <= tau_neg:
            label = 0
        else:
            continue
        text, img = "", ""
        if pool is not None and record_id in pool:
            rec = pool.get(record_id)
            text, img = rec.text, rec.img
        out.append(
            PseudoCandidate(record_id=record_id, confidence=p, assigned_label=label, text=text, img=img)
        )
    return out


def candidates_to_records(candidates: Sequence[PseudoCandidate], name: str = "pseudo_selected") -> RecordSet:
    """Materialize candidates as labeled records with source=pseudo."""
    return RecordSet(
        [
            MemeRecord(
                id=c.record_id,
                img=c.img,
                text=c.text,
                label=c.assigned_label,
                source="pseudo",
                confidence=c.confidence,
            )
            for c in candidates
        ],
        name=name,
    )


def simulate_review(candidates: Sequence[PseudoCandidate], truth: Mapping[int, int]) -> RecordSet:
    """Stand-in for the human pass over positive candidates.

    Accepts exactly the label-1 candidates whose ground-truth label is
    1; rejected positives and all negative candidates are dropped. Only
    the accepted-positive subset survives into the filtered stage.
    """
    accepted = [
        c
        for c in candidates
        if c.assigned_label == 1 and truth.get(c.record_id) == 1
    ]
    return candidates_to_records(accepted, name="pseudo_accepted")


def _check_pseudo_component(part: RecordSet, what: str) -> None:
    for rec in part:
        if rec.source != "pseudo":
            raise MetadataError(f"{what} record {rec.id} has source {rec.source!r}, expected 'pseudo'")
        if rec.label is None:
            raise MetadataError(f"{what} record {rec.id} is unlabeled")


def build_stage_metadata(
    stage: str,
    hm_train: RecordSet,
    dev_remainder: Optional[RecordSet] = None,
    manual: Optional[RecordSet] = None,
    pseudo_set: Optional[RecordSet] = None,
    filtered_set: Optional[RecordSet] = None,
) -> RecordSet:
    """Training metadata for one stage; ledger keeps the composition.

    S0 = hm_train; S1 = hm_train + dev_remainder + manual;
    S2 = S1 + pseudo_set; S3 = S1 + filtered_set. Id collisions across
    components abort.
    """
    stage = resolve_stage(stage)
    if stage == "S0_baseline":
        return RecordSet(hm_train.records, name="S0_baseline")
    if dev_remainder is None or manual is None:
        raise ValueError(f"{stage} needs dev_remainder and manual record sets")
    s1 = compose_training_metadata(hm_train, dev_remainder, manual)
    if stage == "S1_manual":
        return s1.with_name("S1_manual")
    if stage == "S2_pseudo":
        if pseudo_set is None:
            raise ValueError("S2_pseudo needs the pseudo-labeled set")
        _check_pseudo_component(pseudo_set, "pseudo")
        return concat([s1, pseudo_set], name="S2_pseudo")
    if filtered_set is None:
        raise ValueError("S3_filtered needs the human-filtered set")
    _check_pseudo_component(filtered_set, "filtered")
    return concat([s1, filtered_set], name="S3_filtered")


# ---------------------------------------------------------------------------
# Experiment orchestration
# ---------------------------------------------------------------------------


def reference_train_configs() -> dict[str, TrainConfig]:
    """The two full-scale fine-tuning recipes, verbatim."""
    return {
        "model_1": TrainConfig(
            total_steps=3000, warmup_steps=2000, schedule="warmup_linear",
            batch_size=32, base_lr=5e-5, backbone_lr_ratio=0.3,
        ),
        "model_2": TrainConfig(
            total_steps=3500, warmup_steps=500, schedule="warmup_cosine",
            batch_size=80, base_lr=5e-5, backbone_lr_ratio=0.6,
        ),
    }


def synthetic_train_configs(total_steps: int = 300, base_lr: float = 2e-3) -> dict[str, TrainConfig]:
    """The same two schedule shapes, rescaled so from-scratch training
    on small synthetic corpora actually converges."""
    w1 = max(1, (total_steps * 2) // 3)
    w2 = max(1, total_steps // 7)
    return {
        "model_1": TrainConfig(
            total_steps=total_steps, warmup_steps=w1, schedule="warmup_linear",
            batch_size=32, base_lr=base_lr, backbone_lr_ratio=0.3,
        ),
        "model_2": TrainConfig(
            total_steps=total_steps + total_steps // 6, warmup_steps=w2, schedule="warmup_cosine",
            batch_size=80, base_lr=base_lr, backbone_lr_ratio=0.6,
        ),
    }


def _square_grid(n_regions: int) -> tuple[int, int]:
    best = (1, n_regions)
    for rows in range(1, n_regions + 1):
        if n_regions % rows == 0:
            cols = n_regions // rows
            if rows <= cols and cols - rows < best[1] - best[0]:
                best = (rows, cols)
    return best


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a four-stage synthetic run needs."""

    spec: SynthSpec = field(default_factory=lambda: SynthSpec(n_train=600, n_dev=160, n_test=160, noise=0.1))
    n_manual: int = 60
    n_pool: int = 300
    n_dev_to_train: int = 32
    model_cfg: FusionConfig = None  # type: ignore[assignment]
    train_cfgs: dict[str, TrainConfig] = field(default_factory=synthetic_train_configs)
    tau_pos: float = TAU_POS_DEFAULT
    tau_neg: float = TAU_NEG_DEFAULT
    cutout_frac: float = 0.25
    cutout_fill: float = 0.0
    reextract_features: bool = True
    pool_irregular_frac: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_cfg is None:
            object.__setattr__(
                self,
                "model_cfg",
                FusionConfig(
                    vocab_size=self.spec.vocab_size + 8,
                    max_text_len=self.spec.text_len + 2,
                    n_regions=4,
                    region_dim=16,
                ),
            )
        if self.n_manual < 0 or self.n_pool < 0:
            raise ValueError("n_manual and n_pool must be non-negative")
        if not (0 <= self.n_dev_to_train <= self.spec.n_dev):
            raise ValueError("n_dev_to_train must fit inside the dev split")
        if not (0.0 <= self.tau_neg < self.tau_pos <= 1.0):
            raise ValueError("thresholds must satisfy 0 <= tau_neg < tau_pos <= 1")
        if not self.train_cfgs:
            raise ValueError("at least one training config is required")
        if not (0.0 <= self.pool_irregular_frac <= 1.0):
            raise ValueError("pool_irregular_frac must be in [0, 1]")


@dataclass
class StageRow:
    """One stage/model result line of the final report."""

    stage: str
    model: str
    n_train: int
    val: EvalResult
    test: EvalResult
    wall_time_s: float = 0.0


@dataclass
class ExperimentReport:
    """Stage/model rows plus the ledgers that audit each composition."""

    rows: list = field(default_factory=list)
    ledgers: dict = field(default_factory=dict)
    pool_total: int = 0
    pool_valid: int = 0
    pool_rejected: int = 0
    selected: list = field(default_factory=list)
    n_accepted: int = 0
    pseudo_model: str = ""
    train_reports: dict = field(default_factory=dict)

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    def to_csv(self) -> str:
        lines = ["stage,model,val_acc,val_auroc,test_acc,test_auroc"]
        for r in self.rows:
            lines.append(
                f"{r.stage},{r.model},{r.val.accuracy:.6f},{r.val.auroc:.6f},"
                f"{r.test.accuracy:.6f},{r.test.auroc:.6f}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ("Dataset", "Model", "Val Acc", "Val AUROC", "Test Acc", "Test AUROC")
        body = [
            (
                r.stage,
                r.model,
                f"{r.val.accuracy:.4f}",
                f"{r.val.auroc:.4f}",
                f"{r.test.accuracy:.4f}",
                f"{r.test.auroc:.4f}",
            )
            for r in self.rows
        ]
        widths = [max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i]) for i in range(6)]
        def fmt(row):
            return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule] + [fmt(row) for row in body]) + "\n"

    def ledger_json(self) -> str:
        payload = {
            stage: {"total": ledger.total, "by_source": dict(ledger.by_source)}
            for stage, ledger in self.ledgers.items()
        }
        payload["pool"] = {
            "total": self.pool_total,
            "valid": self.pool_valid,
            "rejected_irregular": self.pool_rejected,
            "selected": self.n_selected,
            "accepted": self.n_accepted,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _aux_corpus(cfg: ExperimentConfig) -> SynthCorpus:
    aux_seed = int(np.random.SeedSequence((_DOMAIN_AUX, cfg.spec.seed)).generate_state(1)[0])
    aux_spec = replace(cfg.spec, n_train=cfg.n_manual + cfg.n_pool, n_dev=0, n_test=0, seed=aux_seed)
    return generate_corpus(aux_spec, id_start=1_000_000)


def _inject_irregular(pool: RecordSet, frac: float, seed: int) -> RecordSet:
    """Replace a deterministic fraction of pool captions with the literal
    junk value real exports contain, to exercise text validation."""
    k = int(round(frac * len(pool)))
    if k == 0:
        return pool
    rng = np.random.default_rng(np.random.SeedSequence((_DOMAIN_IRREGULAR, seed)))
    chosen = set(rng.choice(len(pool), size=k, replace=False).tolist())
    records = [
        replace(rec, text="None") if i in chosen else rec
        for i, rec in enumerate(pool.records)
    ]
    return RecordSet(records, name=pool.name)


def _split_dev(dev: RecordSet, n_to_train: int) -> tuple[RecordSet, RecordSet]:
    head = RecordSet(dev.records[:n_to_train], name="dev_remainder")
    tail = RecordSet(dev.records[n_to_train:], name="dev_val")
    return head, tail


def run_experiment(
    cfg: ExperimentConfig,
    stages: Sequence[str] = ("S0", "S1", "S2", "S3"),
    outdir: Optional[str | Path] = None,
    filtered_override: Optional[RecordSet] = None,
    log=None,
) -> ExperimentReport:
    """Run the requested stages end to end on generated data.

    S2 and S3 require S1 in the same run (pseudo-labels come from an
    S1-trained model). The report carries one row per stage and model
    config, the per-stage count ledgers, and the pool bookkeeping;
    when ``outdir`` is set, CSV/table/ledger files, stage metadata and
    checkpoints are written there. ``filtered_override`` substitutes an
    externally reviewed accepted set (e.g. the review service export)
    for the simulated review in S3.
    """
    say = log if log is not None else (lambda *_: None)
    wanted = [resolve_stage(s) for s in stages]
    if len(set(wanted)) != len(wanted):
        raise ValueError("duplicate stages requested")
    wanted.sort(key=STAGES.index)
    needs_s1 = {"S2_pseudo", "S3_filtered"} & set(wanted)
    if needs_s1 and "S1_manual" not in wanted:
        raise ValueError(f"{sorted(needs_s1)} require S1_manual in the same run")

    say(f"generating corpus: train={cfg.spec.n_train} dev={cfg.spec.n_dev} test={cfg.spec.n_test}")
    corpus = generate_corpus(cfg.spec)
    hm_train = corpus.train.with_name("hm_train")
    dev_remainder, dev_val = _split_dev(corpus.dev, cfg.n_dev_to_train)
    test = corpus.test

    aux = _aux_corpus(cfg)
    manual = RecordSet(
        [replace(r, source="memotion_manual") for r in aux.train.records[: cfg.n_manual]],
        name="manual",
    )
    pool_truth = RecordSet(
        [replace(r, source="memotion_pool") for r in aux.train.records[cfg.n_manual :]],
        name="pool_truth",
    )
    truth_labels = {rec.id: rec.label for rec in pool_truth}
    pool_raw = strip_labels(pool_truth, source="memotion_pool").with_name("pool")
    pool_raw = _inject_irregular(pool_raw, cfg.pool_irregular_frac, cfg.spec.seed)
    pool, pool_dropped = validate_text(pool_raw)

    images = dict(corpus.images)
    images.update(aux.images)
    feat_cfg = FeatureConfig(
        expected_size=cfg.spec.image_size,
        n_regions=cfg.model_cfg.n_regions,
        region_dim=cfg.model_cfg.region_dim,
        grid=_square_grid(cfg.model_cfg.n_regions),
    )
    features, skipped = extract_batch(sorted(images.items()), feat_cfg)
    if skipped:
        raise RuntimeError(f"{len(skipped)} generated images failed feature extraction")
    store = FeatureStore.from_features(features, feat_cfg.n_regions, feat_cfg.region_dim)
    say(f"extracted features for {len(features)} images")

    report = ExperimentReport(
        pool_total=len(pool_raw), pool_valid=len(pool), pool_rejected=len(pool_dropped)
    )
    eval_ids = dev_val.ids() | test.ids()

    trained: dict[tuple[str, str], tuple] = {}

    def run_stage(stage: str, metadata: RecordSet, stage_store: FeatureStore) -> None:
        report.ledgers[stage] = metadata.ledger
        overlap = metadata.ids() & eval_ids
        if overlap:
            raise RuntimeError(f"stage {stage} training metadata overlaps evaluation ids: {sorted(overlap)[:5]}")
        if outdir is not None:
            write_metadata(metadata, Path(outdir) / f"{stage}.jsonl")
        for model_name, train_cfg in cfg.train_cfgs.items():
            started = time.monotonic()
            say(f"training {stage} / {model_name} on {len(metadata)} records")
            params, vocab, train_report = train(
                metadata, stage_store, cfg.model_cfg, train_cfg, dev_records=dev_val
            )
            val = evaluate_model(dev_val, params, cfg.model_cfg, vocab, stage_store)
            tst = evaluate_model(test, params, cfg.model_cfg, vocab, stage_store)
            row = StageRow(
                stage=stage,
                model=model_name,
                n_train=len(metadata),
                val=val,
                test=tst,
                wall_time_s=time.monotonic() - started,
            )
            report.rows.append(row)
            report.train_reports[(stage, model_name)] = train_report
            trained[(stage, model_name)] = (params, vocab)
            if outdir is not None:
                save_checkpoint(Path(outdir) / f"{stage}_{model_name}.ckpt", params, cfg.model_cfg)
            say(
                f"  {stage}/{model_name}: val acc {val.accuracy:.3f} auroc {val.auroc:.3f} | "
                f"test acc {tst.accuracy:.3f} auroc {tst.auroc:.3f}"
            )

    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)

    if "S0_baseline" in wanted:
        run_stage("S0_baseline", build_stage_metadata("S0", hm_train), store)

    pseudo_records: Optional[RecordSet] = None
    accepted_records: Optional[RecordSet] = None
    stage_store = store

    if "S1_manual" in wanted:
        s1 = build_stage_metadata("S1", hm_train, dev_remainder, manual)
        run_stage("S1_manual", s1, store)

        if needs_s1:
            s1_rows = [r for r in report.rows if r.stage == "S1_manual"]
            best = max(s1_rows, key=lambda r: r.val.auroc)
            # max() keeps the first of equals; config order breaks ties.
            report.pseudo_model = best.model
            params, vocab = trained[("S1_manual", best.model)]
            say(f"pseudo-labeling pool ({len(pool)} records) with {best.model}")
            probs = predict_proba(list(pool), params, cfg.model_cfg, vocab, store)
            pool_probas = {rec.id: float(p) for rec, p in zip(pool, probs)}
            candidates = filter_pseudo(pool_probas, cfg.tau_pos, cfg.tau_neg, pool=pool)
            report.selected = candidates
            pseudo_records = candidates_to_records(candidates)
            say(f"selected {len(candidates)} pseudo-labels")

            if filtered_override is not None:
                accepted_records = filtered_override
            else:
                accepted_records = simulate_review(candidates, truth_labels)
            report.n_accepted = len(accepted_records)

            if len(candidates) and cfg.cutout_frac > 0:
                augmented = augment_set(
                    pseudo_records, images, frac=cfg.cutout_frac, fill=cfg.cutout_fill, seed=cfg.spec.seed
                )
                if cfg.reextract_features:
                    aug_features, aug_skipped = extract_batch(sorted(augmented.items()), feat_cfg)
                    if aug_skipped:
                        raise RuntimeError("augmented images failed feature extraction")
                    merged = {f.record_id: f for f in features}
                    merged.update({f.record_id: f for f in aug_features})
                    stage_store = FeatureStore.from_features(
                        merged.values(), feat_cfg.n_regions, feat_cfg.region_dim
                    )

    if "S2_pseudo" in wanted:
        s2 = build_stage_metadata("S2", hm_train, dev_remainder, manual, pseudo_set=pseudo_records)
        run_stage("S2_pseudo", s2, stage_store)

    if "S3_filtered" in wanted:
        s3 = build_stage_metadata("S3", hm_train, dev_remainder, manual, filtered_set=accepted_records)
        run_stage("S3_filtered", s3, stage_store)

    if outdir is not None:
        out = Path(outdir)
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        (out / "ledgers.json").write_text(report.ledger_json() + "\n", encoding="utf-8")
    return report

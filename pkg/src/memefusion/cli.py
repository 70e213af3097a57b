"""Command-line front end: one thin subcommand per library operation.

Every command takes --seed and --config; the config file is JSON with a
"model" block (fusion shape), "model_1"/"model_2" training blocks
preloaded with the two published fine-tuning columns, a "synth" block
for corpus generation, and threshold/cutout settings. Commands write
artifacts to explicit paths and print a short summary; failures exit
nonzero with a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import augment as augment_mod
from . import corpus as corpus_mod
from . import engine as engine_mod
from . import metrics as metrics_mod
from .features import FeatureConfig, FeatureStore, extract_batch
from .model import FusionConfig, Vocab, load_checkpoint
from .review import ReviewServer, ReviewSession, images_from_dir
from .synth import SynthImage, SynthSpec, generate_corpus, read_image, write_corpus, write_image
from .trainer import TrainConfig, evaluate_model, train


def default_config() -> dict:
    """Config skeleton with the two published training columns."""
    spec = SynthSpec(n_train=600, n_dev=160, n_test=160, noise=0.1)
    model = FusionConfig(
        vocab_size=spec.vocab_size + 8,
        max_text_len=spec.text_len + 2,
        n_regions=4,
        region_dim=16,
    )
    cfg = {
        "synth": asdict(spec),
        "model": asdict(model),
        "tau_pos": engine_mod.TAU_POS_DEFAULT,
        "tau_neg": engine_mod.TAU_NEG_DEFAULT,
        "cutout": {"frac": 0.25, "fill": 0.0},
    }
    # Building the config is pure data handling; the long-warmup warning
    # belongs to actual training runs, not to every CLI invocation.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, tc in engine_mod.reference_train_configs().items():
            cfg[name] = asdict(tc)
    return cfg


def load_config(path: Optional[str]) -> dict:
    """Defaults overlaid with the user's file (shallow per top-level key,
    dict blocks merged key-wise)."""
    cfg = default_config()
    if path is None:
        return cfg
    user = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(user, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    return cfg


def _synth_spec(cfg: dict, seed: Optional[int]) -> SynthSpec:
    block = dict(cfg["synth"])
    if seed is not None:
        block["seed"] = seed
    block["mix"] = tuple(block["mix"])
    block["image_size"] = tuple(block["image_size"])
    return SynthSpec(**block)


def _model_cfg(cfg: dict) -> FusionConfig:
    return FusionConfig(**cfg["model"])


def _train_cfg(cfg: dict, key: str, seed: Optional[int]) -> TrainConfig:
    # a block set to null counts as absent so configs can switch models off
    if cfg.get(key) is None:
        raise ValueError(f"config has no training block {key!r}")
    block = dict(cfg[key])
    if seed is not None:
        block["seed"] = seed
    return TrainConfig(**block)


def _read_records(path: str, expect_labels: bool, name: str | None = None) -> corpus_mod.RecordSet:
    report = corpus_mod.ingest_metadata(path, expect_labels=expect_labels, name=name)
    if report.malformed:
        for lineno, message in report.malformed:
            print(f"{path}:{lineno}: {message}", file=sys.stderr)
        raise ValueError(f"{len(report.malformed)} malformed lines in {path}")
    return report.records


def _load_images(records, images_dir: str) -> dict[int, SynthImage]:
    root = Path(images_dir)
    out: dict[int, SynthImage] = {}
    for rec in records:
        for candidate in (root / rec.img, root / Path(rec.img).name):
            if candidate.exists():
                out[rec.id] = read_image(candidate)
                break
        else:
            raise FileNotFoundError(f"image for record {rec.id} not found under {root} ({rec.img})")
    return out


def _feature_cfg(cfg: dict) -> FeatureConfig:
    model = _model_cfg(cfg)
    spec = _synth_spec(cfg, None)
    return FeatureConfig(
        expected_size=spec.image_size,
        n_regions=model.n_regions,
        region_dim=model.region_dim,
        grid=engine_mod._square_grid(model.n_regions),
    )


def _write_preds(path: str, ids, probs, labels=None) -> None:
    lines = ["id,probability" + (",label" if labels is not None else "")]
    for i, rid in enumerate(ids):
        row = f"{rid},{probs[i]:.10g}"
        if labels is not None:
            row += f",{labels[i]}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_preds(path: str) -> tuple[list[int], np.ndarray, Optional[np.ndarray]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"empty predictions file {path}")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        id_col = header.index("id")
        prob_col = header.index("probability")
    except ValueError:
        raise ValueError(f"{path}: header must name 'id' and 'probability' columns") from None
    label_col = header.index("label") if "label" in header else None
    ids: list[int] = []
    probs: list[float] = []
    labels: list[int] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        ids.append(int(cells[id_col]))
        probs.append(float(cells[prob_col]))
        if label_col is not None:
            labels.append(int(cells[label_col]))
    return (
        ids,
        np.asarray(probs, dtype=np.float64),
        np.asarray(labels, dtype=np.int64) if label_col is not None else None,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args, cfg) -> int:
    spec = _synth_spec(cfg, args.seed)
    for field_name in ("n_train", "n_dev", "n_test", "noise"):
        value = getattr(args, field_name)
        if value is not None:
            spec = replace(spec, **{field_name: value})
    corpus = generate_corpus(spec)
    write_corpus(corpus, args.out)
    print(
        f"wrote corpus to {args.out}: train={len(corpus.train)} "
        f"dev={len(corpus.dev)} test={len(corpus.test)} images={len(corpus.images)}"
    )
    return 0


def _cmd_ingest(args, cfg) -> int:
    report = corpus_mod.ingest_metadata(args.path, expect_labels=not args.unlabeled)
    for lineno, message in report.malformed:
        print(f"{args.path}:{lineno}: {message}", file=sys.stderr)
    ledger = report.records.ledger
    print(f"{len(report.records)} records ({dict(ledger.by_source)}), {len(report.malformed)} malformed")
    return 1 if report.malformed else 0


def _cmd_validate(args, cfg) -> int:
    records = _read_records(args.path, expect_labels=not args.unlabeled)
    kept, rejected = corpus_mod.validate_text(records)
    corpus_mod.write_metadata(kept, args.out)
    if args.rejected:
        corpus_mod.write_metadata(rejected, args.rejected)
    print(f"kept {len(kept)} of {len(records)} records; rejected {len(rejected)} irregular texts")
    return 0


def _cmd_extract_features(args, cfg) -> int:
    records = _read_records(args.metadata, expect_labels=False)
    images = _load_images(records, args.images)
    feat_cfg = _feature_cfg(cfg)
    features, skipped = extract_batch(sorted(images.items()), feat_cfg)
    for s in skipped:
        print(f"skipped record {s.record_id}: {s.reason}", file=sys.stderr)
    store = FeatureStore.from_features(features, feat_cfg.n_regions, feat_cfg.region_dim)
    store.write(args.out)
    print(f"extracted {len(features)} feature sets to {args.out} ({len(skipped)} skipped)")
    return 0


def _cmd_train(args, cfg) -> int:
    records = _read_records(args.metadata, expect_labels=True)
    store = FeatureStore.read(args.features)
    model_cfg = _model_cfg(cfg)
    train_cfg = _train_cfg(cfg, args.model_config, args.seed)
    train_cfg = replace(train_cfg, checkpoint_path=args.out)
    dev = _read_records(args.dev, expect_labels=True) if args.dev else None
    if dev is not None:
        dev_store = FeatureStore.read(args.dev_features) if args.dev_features else store
        have = set(dev_store.ids())
        missing = [r.id for r in dev if r.id not in have]
        if missing:
            raise ValueError(
                f"features missing for {len(missing)} dev records; pass --dev-features"
            )
        if dev_store is not store:
            known = set(store.ids())
            for rf in dev_store.all():
                if rf.record_id not in known:
                    store.add(rf)
    params, vocab, report = train(
        records, store, model_cfg, train_cfg, dev_records=dev, log_every=args.log_every
    )
    report.loss_csv(Path(args.out).with_suffix(".loss.csv"))
    line = f"trained {args.model_config} for {train_cfg.total_steps} steps; final loss {report.losses[-1]:.4f}"
    if report.final_eval is not None:
        line += f"; dev acc {report.final_eval.accuracy:.4f} auroc {report.final_eval.auroc:.4f}"
    print(line)
    print(f"checkpoint written to {args.out}")
    return 0


def _load_ckpt_with_vocab(path: str) -> tuple:
    params, model_cfg = load_checkpoint(path)
    vocab_path = Path(path).with_suffix(".vocab.json")
    if not vocab_path.exists():
        raise FileNotFoundError(f"vocabulary sidecar missing: {vocab_path}")
    return params, model_cfg, Vocab.load(vocab_path)


def _cmd_predict(args, cfg) -> int:
    params, model_cfg, vocab = _load_ckpt_with_vocab(args.ckpt)
    records = _read_records(args.metadata, expect_labels=False)
    store = FeatureStore.read(args.features)
    from .model import predict_proba

    probs = predict_proba(list(records), params, model_cfg, vocab, store)
    labels = [r.label for r in records]
    have_labels = all(l is not None for l in labels) and len(records) > 0
    _write_preds(args.out, [r.id for r in records], probs, labels if have_labels else None)
    print(f"wrote {len(records)} predictions to {args.out}")
    return 0


def _cmd_pseudo_filter(args, cfg) -> int:
    ids, probs, _ = _read_preds(args.pred)
    pool = _read_records(args.metadata, expect_labels=False) if args.metadata else None
    candidates = engine_mod.filter_pseudo(
        dict(zip(ids, probs)), tau_pos=args.tau_pos, tau_neg=args.tau_neg, pool=pool
    )
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for c in candidates:
            fh.write(
                json.dumps(
                    {
                        "id": c.record_id,
                        "confidence": c.confidence,
                        "assigned_label": c.assigned_label,
                        "text": c.text,
                        "img": c.img,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    n_pos = sum(1 for c in candidates if c.assigned_label == 1)
    print(f"selected {len(candidates)} of {len(ids)} ({n_pos} positive, {len(candidates) - n_pos} negative)")
    return 0


def _cmd_augment(args, cfg) -> int:
    records = _read_records(args.metadata, expect_labels=False)
    images = _load_images(records, args.images)
    seed = args.seed if args.seed is not None else 0
    augmented = augment_mod.augment_set(
        records, images, frac=args.frac, fill=args.fill, seed=seed
    )
    outdir = Path(args.out)
    (outdir / "img").mkdir(parents=True, exist_ok=True)
    for record_id, image in sorted(augmented.items()):
        write_image(outdir / "img" / f"{record_id:07d}.bin", image)
    print(f"augmented {len(augmented)} images into {outdir}")
    return 0


def _cmd_merge(args, cfg) -> int:
    base = _read_records(args.base, expect_labels=False)
    additions = _read_records(args.additions, expect_labels=False)
    merged = corpus_mod.merge(base, additions, policy=args.policy)
    corpus_mod.write_metadata(merged, args.out)
    print(
        f"merged {len(base)} + {len(additions)} -> {len(merged)} records "
        f"({merged.ledger.replaced} replaced)"
    )
    return 0


def _cmd_evaluate(args, cfg) -> int:
    ids, probs, labels = _read_preds(args.pred)
    if labels is None:
        if not args.metadata:
            raise ValueError("predictions carry no label column; pass --metadata")
        records = _read_records(args.metadata, expect_labels=True)
        by_id = {r.id: r.label for r in records}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValueError(f"{len(missing)} predicted ids missing from metadata (first: {missing[:5]})")
        labels = np.asarray([by_id[i] for i in ids], dtype=np.int64)
    result = metrics_mod.evaluate(probs, labels, threshold=args.threshold)
    print(f"n={result.n} accuracy={result.accuracy:.4f} auroc={result.auroc:.4f}")
    return 0


def _cmd_experiment(args, cfg, user_config_given: bool) -> int:
    spec = _synth_spec(cfg, args.seed)
    for field_name in ("n_train", "n_dev", "n_test", "noise"):
        value = getattr(args, field_name)
        if value is not None:
            spec = replace(spec, **{field_name: value})
    if user_config_given:
        train_cfgs = {
            key: _train_cfg(cfg, key, args.seed)
            for key in ("model_1", "model_2")
            if cfg.get(key) is not None
        }
    else:
        train_cfgs = engine_mod.synthetic_train_configs()
        if args.seed is not None:
            train_cfgs = {k: replace(v, seed=args.seed) for k, v in train_cfgs.items()}
    exp = engine_mod.ExperimentConfig(
        spec=spec,
        model_cfg=_model_cfg(cfg),
        train_cfgs=train_cfgs,
        tau_pos=cfg["tau_pos"],
        tau_neg=cfg["tau_neg"],
        cutout_frac=cfg["cutout"]["frac"],
        cutout_fill=cfg["cutout"]["fill"],
        n_manual=args.n_manual,
        n_pool=args.n_pool,
        n_dev_to_train=min(args.n_dev_to_train, spec.n_dev),
        seed=spec.seed,
    )
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    report = engine_mod.run_experiment(exp, stages=stages, outdir=args.out, log=print)
    print()
    print(report.to_text(), end="")
    if args.out:
        print(f"report files written to {args.out}")
    return 0


def _cmd_serve_review(args, cfg) -> int:
    candidates = []
    for lineno, line in enumerate(Path(args.candidates).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        candidates.append(
            engine_mod.PseudoCandidate(
                record_id=int(obj["id"]),
                confidence=float(obj["confidence"]),
                assigned_label=int(obj["assigned_label"]),
                text=obj.get("text", ""),
                img=obj.get("img", ""),
            )
        )
    session = ReviewSession(candidates, log_path=args.log)
    image_source = images_from_dir(args.images) if args.images else None
    server = ReviewServer(
        session,
        image_source=image_source,
        host=args.host,
        port=args.port,
        static_dir=args.static,
        quiet=False,
    )
    print(f"serving {len(session)} candidates at {server.url} (decision log: {args.log})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memefusion",
        description="Semi-supervised multimodal meme classification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=None, help="override every seed in the run")
        p.add_argument("--config", default=None, help="JSON config file overlaying the defaults")
        return p

    p = add("synth", "generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-dev", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)

    p = add("ingest", "parse a metadata JSONL file and report its ledger")
    p.add_argument("--path", required=True)
    p.add_argument("--unlabeled", action="store_true", help="do not require labels")

    p = add("validate", "drop irregular captions from a metadata file")
    p.add_argument("--path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rejected", default=None, help="also write rejected records here")
    p.add_argument("--unlabeled", action="store_true")

    p = add("extract-features", "pool region features for every record's image")
    p.add_argument("--metadata", required=True)
    p.add_argument("--images", required=True, help="corpus root containing the img/ files")
    p.add_argument("--out", required=True)

    p = add("train", "train one model config on a metadata file")
    p.add_argument("--metadata", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--model-config", default="model_1", choices=("model_1", "model_2"))
    p.add_argument("--dev", default=None, help="labeled metadata for final evaluation")
    p.add_argument("--dev-features", default=None, help="feature store covering the dev records")
    p.add_argument("--log-every", type=int, default=0)

    p = add("predict", "score records with a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="CSV of id,probability[,label]")

    p = add("pseudo-filter", "two-tail confidence selection over predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True, help="candidate JSONL")
    p.add_argument("--metadata", default=None, help="pool metadata supplying text/img refs")
    p.add_argument("--tau-pos", type=float, default=engine_mod.TAU_POS_DEFAULT)
    p.add_argument("--tau-neg", type=float, default=engine_mod.TAU_NEG_DEFAULT)

    p = add("augment", "cutout-augment the images of the given records")
    p.add_argument("--metadata", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frac", type=float, default=0.25)
    p.add_argument("--fill", type=float, default=0.0)

    p = add("merge", "merge two metadata files")
    p.add_argument("--base", required=True)
    p.add_argument("--additions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", default="error_on_dup", choices=("error_on_dup", "replace_on_dup"))

    p = add("evaluate", "accuracy and AUROC of a predictions CSV")
    p.add_argument("--pred", required=True)
    p.add_argument("--metadata", default=None, help="labels when the CSV has no label column")
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("experiment", "run the staged experiment on synthetic data")
    p.add_argument("--stages", default="S0,S1,S2,S3")
    p.add_argument("--out", default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-dev", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--n-manual", type=int, default=60)
    p.add_argument("--n-pool", type=int, default=300)
    p.add_argument("--n-dev-to-train", type=int, default=32)

    p = add("serve-review", "serve the triage API and UI over HTTP")
    p.add_argument("--candidates", required=True, help="candidate JSONL from pseudo-filter")
    p.add_argument("--log", required=True, help="append-only decision log path")
    p.add_argument("--images", default=None, help="directory with the candidate image files")
    p.add_argument("--static", default=None, help="UI bundle directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8337)

    p = add("write-config", "write the default config JSON")
    p.add_argument("--out", required=True)

    return parser


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "validate": _cmd_validate,
    "extract-features": _cmd_extract_features,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "pseudo-filter": _cmd_pseudo_filter,
    "augment": _cmd_augment,
    "merge": _cmd_merge,
    "evaluate": _cmd_evaluate,
    "serve-review": _cmd_serve_review,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "write-config":
            Path(args.out).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            print(f"wrote config to {args.out}")
            return 0
        if args.command == "experiment":
            return _cmd_experiment(args, cfg, user_config_given=args.config is not None)
        return _COMMANDS[args.command](args, cfg)
    except (ValueError, OSError, KeyError, corpus_mod.MetadataError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

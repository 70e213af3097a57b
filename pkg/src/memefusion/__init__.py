"""Semi-supervised multimodal meme classification pipeline.

A numpy implementation of the full loop: synthetic corpus generation,
region-feature extraction, a text+image fusion transformer trained with
Adam under warmup schedules, rank-based evaluation metrics, two-tail
confidence pseudo-labeling with cutout augmentation, staged experiment
orchestration, and an HTTP review service for human triage of
pseudo-labels.
"""

from .augment import augment_set, cutout, weak_augment
from .corpus import (
    CATEGORIES,
    SOURCES,
    CountLedger,
    IngestReport,
    MemeRecord,
    MetadataError,
    RecordSet,
    compose_training_metadata,
    concat,
    ingest_metadata,
    is_irregular_text,
    merge,
    strip_labels,
    validate_text,
    write_metadata,
)
from .engine import (
    STAGES,
    ExperimentConfig,
    ExperimentReport,
    PseudoCandidate,
    StageRow,
    build_stage_metadata,
    candidates_to_records,
    filter_pseudo,
    reference_train_configs,
    run_experiment,
    simulate_review,
    synthetic_train_configs,
)
from .features import (
    FeatureConfig,
    FeatureStore,
    FeatureStoreError,
    MissingFeaturesError,
    RegionFeatures,
    Skipped,
    extract,
    extract_batch,
)
from .metrics import EvalResult, accuracy, auroc, evaluate
from .model import (
    Batch,
    CheckpointError,
    FusionConfig,
    Vocab,
    build_vocab,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    make_batch,
    predict_proba,
    save_checkpoint,
)
from .review import ReviewDecision, ReviewServer, ReviewSession
from .synth import (
    SynthCorpus,
    SynthImage,
    SynthSpec,
    apportion,
    generate_corpus,
    read_image,
    recover_concept_bit,
    render_image,
    write_corpus,
    write_image,
)
from .trainer import (
    AdamState,
    TrainConfig,
    TrainReport,
    adam_step,
    evaluate_model,
    lr_multiplier,
    train,
)

__version__ = "0.1.0"

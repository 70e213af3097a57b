"""Deterministic synthetic meme corpus generator.

Every record pairs a small intensity-grid "image" with a synthetic token
caption. Hatefulness is carried by two channels:

* a concept bit per modality; a record is hateful when the two bits
  disagree (XOR), which makes the label invisible to either modality
  alone on the multimodal subset,
* a per-modality marker (a reserved token, or a bright marker panel in
  the image) that alone forces the hateful label, for the unimodal-hate
  category.

Benign confounders are built from a hateful bit pairing with exactly one
modality's bit flipped, so single-modality classifiers are systematically
confounded. Everything is a pure function of (spec, seed): two runs with
the same spec produce byte-identical metadata and images.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import CATEGORIES, MemeRecord, RecordSet, write_metadata

_SPLIT_SOURCES = {"train": "hm_train", "dev": "hm_dev_seen", "test": "hm_test_unseen"}
_HATE_CATEGORIES = ("multimodal_hate", "unimodal_hate")

# Seed-domain tags keep the per-purpose RNG streams independent.
_DOMAIN_RECORD = 1
_DOMAIN_TEXTURE = 2
_DOMAIN_ORDER = 6

MARKER_WORD = "mk"


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a generated corpus.

    ``mix`` gives the five category proportions in the order
    multimodal_hate, unimodal_hate, benign_text_confounder,
    benign_image_confounder, random_nonhateful and must sum to 1.
    """

    n_train: int
    n_dev: int
    n_test: int
    mix: tuple[float, float, float, float, float] = (0.4, 0.1, 0.2, 0.2, 0.1)
    image_size: tuple[int, int] = (8, 8)
    vocab_size: int = 64
    text_len: int = 6
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_train, self.n_dev, self.n_test) < 0:
            raise ValueError("split sizes must be non-negative")
        if len(self.mix) != len(CATEGORIES):
            raise ValueError(f"mix must have {len(CATEGORIES)} proportions")
        if any(p < 0 for p in self.mix):
            raise ValueError("mix proportions must be non-negative")
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError(f"mix proportions sum to {sum(self.mix)!r}, expected 1")
        if self.image_size[0] < 2 or self.image_size[1] < 2:
            raise ValueError("image_size must be at least 2x2")
        if self.vocab_size < 8:
            raise ValueError("vocab_size must be at least 8")
        if self.text_len < 2:
            raise ValueError("text_len must be at least 2")
        if not (0.0 <= self.noise < 1.0):
            raise ValueError("noise must be in [0, 1)")

    @property
    def n_concepts(self) -> int:
        return max(1, self.vocab_size // 8)


@dataclass
class SynthImage:
    """Intensity grid in [0, 1] plus the concepts it encodes.

    Images loaded back from disk carry pixels only; the concept fields
    are generation-time provenance.
    """

    pixels: np.ndarray
    concept_bit: Optional[int] = None
    concept_id: Optional[int] = None


@dataclass
class SynthCorpus:
    train: RecordSet
    dev: RecordSet
    test: RecordSet
    images: dict[int, SynthImage]


def apportion(n: int, probs: list[float] | tuple[float, ...]) -> list[int]:
    """Split ``n`` into integer counts proportional to ``probs``.

    Largest-remainder rule; each count differs from ``n * p`` by less
    than 1. Ties go to the lower index.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    total = float(sum(probs))
    if total <= 0:
        raise ValueError("probs must have positive sum")
    exact = [n * p / total for p in probs]
    counts = [int(np.floor(x)) for x in exact]
    remainder = n - sum(counts)
    order = sorted(range(len(probs)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _category_counts(n: int, mix, balanced: bool) -> list[int]:
    """Per-category counts; balanced splits apportion hateful vs benign first."""
    if not balanced:
        return apportion(n, list(mix))
    p_hate = mix[0] + mix[1]
    n_hate, n_benign = apportion(n, [p_hate, 1.0 - p_hate])
    hate = apportion(n_hate, list(mix[:2])) if n_hate else [0, 0]
    benign = apportion(n_benign, list(mix[2:])) if n_benign else [0, 0, 0]
    return hate + benign


def _word_groups(spec: SynthSpec) -> tuple[list[str], list[str], list[str]]:
    """Vocabulary layout: (bit-1 words, bit-0 words, filler words)."""
    n = spec.n_concepts
    pos = [f"p{j}" for j in range(n)]
    neg = [f"q{j}" for j in range(n)]
    fillers = [f"f{j}" for j in range(spec.vocab_size - 1 - 2 * n)]
    return pos, neg, fillers


def vocabulary_words(spec: SynthSpec) -> list[str]:
    """All words the generator may emit, marker first."""
    pos, neg, fillers = _word_groups(spec)
    return [MARKER_WORD] + pos + neg + fillers


def _texture(concept_id: int, size: tuple[int, int]) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((_DOMAIN_TEXTURE, concept_id)))
    return rng.random(size)


def render_image(
    concept_id: int,
    concept_bit: int,
    noise: float,
    seed: int,
    size: tuple[int, int] = (8, 8),
    marker: bool = False,
) -> SynthImage:
    """Render one synthetic image.

    Quadrant layout: top-left encodes the concept bit (dim 0.15 vs
    bright 0.85), top-right the unimodal marker panel (0.1 vs 0.9),
    bottom-left is constant, bottom-right carries a concept-id texture so
    distinct concepts yield distinct images. Uniform noise within
    ``[-noise, +noise]`` is added per pixel and the result is clipped to
    [0, 1], so the noiseless bit panel stays recoverable by a threshold
    on the top-left mean whenever noise < 0.35.
    """
    if concept_bit not in (0, 1):
        raise ValueError("concept_bit must be 0 or 1")
    height, width = size
    half_h, half_w = height // 2, width // 2
    pixels = np.full((height, width), 0.5, dtype=np.float64)
    pixels[:half_h, :half_w] = 0.15 + 0.7 * concept_bit
    pixels[:half_h, half_w:] = 0.9 if marker else 0.1
    pixels[half_h:, half_w:] = 0.3 + 0.4 * _texture(concept_id, size)[half_h:, half_w:]
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        pixels = np.clip(pixels + rng.uniform(-noise, noise, size=pixels.shape), 0.0, 1.0)
    return SynthImage(pixels=pixels, concept_bit=concept_bit, concept_id=concept_id)


def recover_concept_bit(pixels: np.ndarray) -> int:
    """Read the bit panel back off an image (threshold on the top-left mean)."""
    half_h, half_w = pixels.shape[0] // 2, pixels.shape[1] // 2
    return int(np.mean(pixels[:half_h, :half_w]) > 0.5)


def _draw_bits(rng: np.random.Generator, category: str) -> tuple[int, int, Optional[str]]:
    """(image_bit, text_bit, marker_modality) for one record of ``category``."""
    if category == "multimodal_hate":
        img_bit = int(rng.integers(2))
        return img_bit, 1 - img_bit, None
    if category == "unimodal_hate":
        modality = "image" if rng.integers(2) else "text"
        return int(rng.integers(2)), int(rng.integers(2)), modality
    if category == "benign_text_confounder":
        img_bit = int(rng.integers(2))
        return img_bit, img_bit, None  # hateful pair with the text bit flipped back
    if category == "benign_image_confounder":
        txt_bit = int(rng.integers(2))
        return txt_bit, txt_bit, None  # hateful pair with the image bit flipped back
    if category == "random_nonhateful":
        bit = int(rng.integers(2))
        return bit, bit, None
    raise ValueError(f"unknown category {category!r}")


def _make_text(rng: np.random.Generator, spec: SynthSpec, text_bit: int, marked: bool) -> str:
    pos, neg, fillers = _word_groups(spec)
    concept_word = (pos if text_bit else neg)[int(rng.integers(spec.n_concepts))]
    words = [fillers[int(rng.integers(len(fillers)))] for _ in range(spec.text_len)]
    slots = rng.permutation(spec.text_len)
    words[slots[0]] = concept_word
    if marked:
        words[slots[1]] = MARKER_WORD
    return " ".join(words)


def _make_record(
    spec: SynthSpec, record_id: int, category: str, source: str, seed_key: tuple
) -> tuple[MemeRecord, SynthImage]:
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    img_bit, txt_bit, marker_modality = _draw_bits(rng, category)
    label = 1 if category in _HATE_CATEGORIES else 0
    concept_id = int(rng.integers(spec.n_concepts))
    image = render_image(
        concept_id,
        img_bit,
        spec.noise,
        seed=int(rng.integers(2**63)),
        size=spec.image_size,
        marker=marker_modality == "image",
    )
    text = _make_text(rng, spec, txt_bit, marked=marker_modality == "text")
    record = MemeRecord(
        id=record_id,
        img=f"img/{record_id:07d}.bin",
        text=text,
        label=label,
        source=source,
        category=category,
    )
    return record, image


def generate_corpus(spec: SynthSpec, id_start: int = 0) -> SynthCorpus:
    """Generate train/dev/test record sets plus their image store.

    Dev and test apportion hateful vs benign categories separately, so
    whenever the hateful mass of ``mix`` is 0.5 those splits are
    label-balanced within one record. Each split's records are emitted
    in a deterministic shuffled order (so any prefix is a representative
    sample, not a category block) with ids assigned sequentially from
    ``id_start`` across train, dev, test. A record's content depends
    only on its (split, category, index-within-category) coordinates,
    not on the emission order.
    """
    splits: dict[str, RecordSet] = {}
    images: dict[int, SynthImage] = {}
    next_id = id_start
    for split_index, (split, n) in enumerate(
        (("train", spec.n_train), ("dev", spec.n_dev), ("test", spec.n_test))
    ):
        counts = _category_counts(n, spec.mix, balanced=split in ("dev", "test"))
        slots = [
            (category, k)
            for category, count in zip(CATEGORIES, counts)
            for k in range(count)
        ]
        order_rng = np.random.default_rng(
            np.random.SeedSequence((_DOMAIN_ORDER, spec.seed, split_index))
        )
        records = []
        for slot in order_rng.permutation(len(slots)):
            category, k = slots[int(slot)]
            seed_key = (_DOMAIN_RECORD, spec.seed, split_index, CATEGORIES.index(category), k)
            record, image = _make_record(spec, next_id, category, _SPLIT_SOURCES[split], seed_key)
            records.append(record)
            images[next_id] = image
            next_id += 1
        splits[split] = RecordSet(records, name=split)
    return SynthCorpus(train=splits["train"], dev=splits["dev"], test=splits["test"], images=images)


def write_image(path: str | Path, image: SynthImage) -> None:
    """Persist pixels as height, width (little-endian uint32) then
    row-major little-endian float32."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = image.pixels.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", height, width))
        fh.write(image.pixels.astype("<f4").tobytes())


def read_image(path: str | Path) -> SynthImage:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValueError(f"image file too short: {path}")
    height, width = struct.unpack_from("<II", data, 0)
    expected = 8 + 4 * height * width
    if len(data) != expected:
        raise ValueError(f"image file {path}: expected {expected} bytes, found {len(data)}")
    pixels = np.frombuffer(data, dtype="<f4", offset=8).reshape(height, width).astype(np.float64)
    return SynthImage(pixels=pixels)


def write_corpus(corpus: SynthCorpus, outdir: str | Path) -> None:
    """Materialize a corpus: one JSONL per split plus the image files."""
    outdir = Path(outdir)
    for split in ("train", "dev", "test"):
        records: RecordSet = getattr(corpus, split)
        write_metadata(records, outdir / f"{split}.jsonl")
        for rec in records:
            write_image(outdir / rec.img, corpus.images[rec.id])

"""Metadata model and bookkeeping for meme record sets.

A record set is an ordered, immutable collection of meme metadata rows
(id, image path, caption text, optional binary label) plus a count ledger
broken down by provenance. All ingestion, validation, merging, and
composition of training metadata goes through this module so that every
count that shows up in a run report can be traced back to a ledger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional

SOURCES = (
    "hm_train",
    "hm_dev_seen",
    "hm_dev_unseen",
    "hm_test_unseen",
    "memotion_manual",
    "memotion_pool",
    "pseudo",
)

CATEGORIES = (
    "multimodal_hate",
    "unimodal_hate",
    "benign_text_confounder",
    "benign_image_confounder",
    "random_nonhateful",
)

_ASCII_WS = " \t\n\r\f\v"


class MetadataError(ValueError):
    """Raised when record metadata violates a structural invariant."""


@dataclass(frozen=True)
class MemeRecord:
    """One meme's metadata row.

    ``label`` is 0 (not hateful) or 1 (hateful) and must be present for
    records used in training or evaluation; pool records carry ``None``.
    ``confidence`` is the model probability that produced a pseudo label
    and is present exactly when ``source == "pseudo"``.
    """

    id: int
    img: str
    text: str
    label: Optional[int] = None
    source: str = "hm_train"
    category: Optional[str] = None
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id < 0:
            raise MetadataError(f"record id must be a non-negative integer, got {self.id!r}")
        if self.label is not None and (isinstance(self.label, bool) or self.label not in (0, 1)):
            raise MetadataError(f"record {self.id}: label must be 0 or 1, got {self.label!r}")
        if self.source not in SOURCES:
            raise MetadataError(f"record {self.id}: unknown source {self.source!r}")
        if self.category is not None and self.category not in CATEGORIES:
            raise MetadataError(f"record {self.id}: unknown category {self.category!r}")
        if (self.confidence is not None) != (self.source == "pseudo"):
            raise MetadataError(
                f"record {self.id}: confidence must be present iff source is 'pseudo' "
                f"(source={self.source!r}, confidence={self.confidence!r})"
            )
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise MetadataError(f"record {self.id}: confidence {self.confidence!r} outside [0, 1]")

    def to_json_dict(self) -> dict:
        """Serializable dict with a fixed key order; ``None`` fields omitted."""
        out: dict = {"id": self.id, "img": self.img, "text": self.text}
        if self.label is not None:
            out["label"] = self.label
        out["source"] = self.source
        if self.category is not None:
            out["category"] = self.category
        if self.confidence is not None:
            out["confidence"] = self.confidence
        return out

    @staticmethod
    def from_json_dict(obj: dict) -> "MemeRecord":
        if not isinstance(obj, dict):
            raise MetadataError(f"expected a JSON object, got {type(obj).__name__}")
        for key in ("id", "img", "text"):
            if key not in obj:
                raise MetadataError(f"missing required key {key!r}")
        if not isinstance(obj["img"], str) or not isinstance(obj["text"], str):
            raise MetadataError("'img' and 'text' must be strings")
        confidence = obj.get("confidence")
        if confidence is not None:
            if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
                raise MetadataError(f"confidence must be a number, got {confidence!r}")
            confidence = float(confidence)
        return MemeRecord(
            id=obj["id"],
            img=obj["img"],
            text=obj["text"],
            label=obj.get("label"),
            source=obj.get("source", "hm_train"),
            category=obj.get("category"),
            confidence=confidence,
        )


@dataclass(frozen=True)
class CountLedger:
    """Per-source record counts. ``total`` always equals their sum."""

    by_source: tuple[tuple[str, int], ...] = ()
    total: int = 0
    replaced: int = 0

    def __post_init__(self) -> None:
        if self.total != sum(n for _, n in self.by_source):
            raise MetadataError("ledger total does not match per-source counts")

    def count(self, source: str) -> int:
        return dict(self.by_source).get(source, 0)

    def as_dict(self) -> dict:
        return {"by_source": dict(self.by_source), "total": self.total, "replaced": self.replaced}

    @staticmethod
    def from_records(records: Iterable[MemeRecord], replaced: int = 0) -> "CountLedger":
        counts: dict[str, int] = {}
        total = 0
        for rec in records:
            counts[rec.source] = counts.get(rec.source, 0) + 1
            total += 1
        by_source = tuple((s, counts[s]) for s in SOURCES if s in counts)
        return CountLedger(by_source=by_source, total=total, replaced=replaced)


class RecordSet:
    """Ordered, immutable set of records with unique ids and a ledger."""

    def __init__(self, records: Iterable[MemeRecord], name: str = "", replaced: int = 0):
        self.records: tuple[MemeRecord, ...] = tuple(records)
        self.name = name
        by_id: dict[int, MemeRecord] = {}
        for rec in self.records:
            if rec.id in by_id:
                raise MetadataError(f"duplicate record id {rec.id} in set {name!r}")
            by_id[rec.id] = rec
        self._by_id = by_id
        self.ledger = CountLedger.from_records(self.records, replaced=replaced)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[MemeRecord]:
        return iter(self.records)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._by_id

    def get(self, record_id: int) -> MemeRecord:
        return self._by_id[record_id]

    def ids(self) -> frozenset[int]:
        return frozenset(self._by_id)

    def labeled(self) -> bool:
        """True when every record carries a label."""
        return all(rec.label is not None for rec in self.records)

    def with_name(self, name: str) -> "RecordSet":
        return RecordSet(self.records, name=name, replaced=self.ledger.replaced)


@dataclass
class IngestReport:
    """Result of ingesting a metadata file.

    Malformed lines are collected here rather than silently dropped; the
    parseable records land in ``records``.
    """

    records: RecordSet
    malformed: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_malformed(self) -> int:
        return len(self.malformed)


def ingest_metadata(path: str | Path, expect_labels: bool = True, name: str | None = None) -> IngestReport:
    """Read a JSONL metadata file into a :class:`RecordSet`.

    Args:
        path: JSONL file, one record object per line.
        expect_labels: when True, a parseable record without a label is an
            error (training/evaluation metadata must be fully labeled).
        name: name for the resulting set; defaults to the file stem.

    Returns:
        :class:`IngestReport` with the records and any malformed lines.

    Raises:
        FileNotFoundError: the file does not exist.
        MetadataError: duplicate id, or missing label with ``expect_labels``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"metadata file not found: {path}")
    records: list[MemeRecord] = []
    malformed: list[tuple[int, str]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            malformed.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            rec = MemeRecord.from_json_dict(obj)
        except MetadataError as exc:
            malformed.append((lineno, str(exc)))
            continue
        if expect_labels and rec.label is None:
            raise MetadataError(f"{path}:{lineno}: record {rec.id} has no label but labels are required")
        records.append(rec)
    return IngestReport(records=RecordSet(records, name=name or path.stem), malformed=malformed)


def write_metadata(records: RecordSet, path: str | Path) -> None:
    """Write a record set as JSONL (UTF-8, LF line endings, stable key order)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(), ensure_ascii=False))
            fh.write("\n")


def is_irregular_text(text: str) -> bool:
    """True for captions that break tokenization: empty, whitespace-only,
    or (case-insensitively) the literal string "none"."""
    stripped = text.strip(_ASCII_WS)
    return stripped == "" or stripped.lower() == "none"


def validate_text(records: RecordSet) -> tuple[RecordSet, RecordSet]:
    """Split a set into (kept, rejected) by caption usability.

    Order is preserved in both halves and kept + rejected partitions the
    input. Rejection is a return value, never an exception.
    """
    kept = [rec for rec in records if not is_irregular_text(rec.text)]
    rejected = [rec for rec in records if is_irregular_text(rec.text)]
    return (
        RecordSet(kept, name=records.name),
        RecordSet(rejected, name=f"{records.name}_rejected" if records.name else "rejected"),
    )


def merge(base: RecordSet, additions: RecordSet, policy: str = "error_on_dup") -> RecordSet:
    """Merge ``additions`` into ``base``.

    Under ``error_on_dup`` any id collision aborts. Under ``replace_on_dup``
    the addition wins in place and the result ledger records how many base
    records were replaced.
    """
    if policy not in ("error_on_dup", "replace_on_dup"):
        raise ValueError(f"unknown merge policy {policy!r}")
    collisions = base.ids() & additions.ids()
    if collisions and policy == "error_on_dup":
        shown = sorted(collisions)[:10]
        raise MetadataError(f"id collision on merge: {shown}{'...' if len(collisions) > 10 else ''}")
    replacement = {rec.id: rec for rec in additions if rec.id in collisions}
    merged = [replacement.get(rec.id, rec) for rec in base]
    merged.extend(rec for rec in additions if rec.id not in collisions)
    name = f"{base.name}+{additions.name}" if base.name and additions.name else base.name or additions.name
    return RecordSet(merged, name=name, replaced=len(collisions))


def compose_training_metadata(
    hm_train: RecordSet, dev_remainder: RecordSet, manual: RecordSet
) -> RecordSet:
    """Concatenate the three labeled components of the training metadata.

    The result ledger keeps the per-source breakdown so the composition
    (e.g. 8,500 + 100 + 328) stays auditable. Any unlabeled record or id
    collision aborts.
    """
    for part in (hm_train, dev_remainder, manual):
        for rec in part:
            if rec.label is None:
                raise MetadataError(f"unlabeled record {rec.id} in component {part.name!r}")
    out = merge(hm_train, dev_remainder, policy="error_on_dup")
    out = merge(out, manual, policy="error_on_dup")
    return out.with_name("training_metadata")


def concat(parts: Iterable[RecordSet], name: str) -> RecordSet:
    """Concatenate disjoint record sets; any id collision aborts."""
    records: list[MemeRecord] = []
    for part in parts:
        records.extend(part.records)
    return RecordSet(records, name=name)


def strip_labels(records: RecordSet, source: str) -> RecordSet:
    """Copy of ``records`` with labels and categories removed and ``source`` reassigned.

    Used to turn a generated labeled split into an unlabeled forecast pool.
    """
    return RecordSet(
        [replace(rec, label=None, category=None, source=source, confidence=None) for rec in records],
        name=records.name,
    )

"""Region-feature extraction and the on-disk feature store.

The extractor pools grid cells of an image into fixed-width region
vectors (summary statistics plus positional encodings), standing in for
a detector while keeping the "K regions x D dims, projected into the
text embedding space" interface. Images whose size does not match the
config are skipped with a reason, never raised on, so batch extraction
is total: every input becomes either features or a skip entry.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .synth import SynthImage

_MAGIC = b"MFST"
_N_STATS = 6  # mean, std, min, max, row position, column position


class FeatureStoreError(Exception):
    """Raised for malformed store files and duplicate ids."""


class MissingFeaturesError(KeyError):
    """Raised when a record id has no stored features."""


@dataclass(frozen=True)
class FeatureConfig:
    """Expected image size plus the pooling grid.

    ``grid`` is (rows, cols) with rows * cols == n_regions; each cell
    pools to one region vector of ``region_dim`` entries.
    """

    expected_size: tuple[int, int] = (8, 8)
    n_regions: int = 4
    region_dim: int = 16
    grid: tuple[int, int] = (2, 2)

    def __post_init__(self) -> None:
        rows, cols = self.grid
        if rows * cols != self.n_regions:
            raise ValueError(f"grid {self.grid} does not cover n_regions={self.n_regions}")
        if self.region_dim < 1:
            raise ValueError("region_dim must be positive")
        if min(self.expected_size) < 1 or min(self.grid) < 1:
            raise ValueError("expected_size and grid must be positive")


@dataclass(frozen=True)
class Skipped:
    """A record the extractor refused, with the reason."""

    record_id: int
    reason: str


@dataclass
class RegionFeatures:
    """Region vectors for one record; ``regions`` is n_regions x region_dim float32."""

    record_id: int
    regions: np.ndarray


def _cell_vector(cell: np.ndarray, row_frac: float, col_frac: float, region_dim: int) -> np.ndarray:
    stats = np.array(
        [
            float(np.mean(cell)),
            float(np.std(cell)),
            float(np.min(cell)),
            float(np.max(cell)),
            row_frac,
            col_frac,
        ],
        dtype=np.float64,
    )
    if region_dim <= _N_STATS:
        return stats[:region_dim]
    return np.concatenate([stats, np.zeros(region_dim - _N_STATS)])


def extract(image: SynthImage, cfg: FeatureConfig, record_id: int = 0) -> RegionFeatures | Skipped:
    """Pool one image into region features, or skip it.

    Returns :class:`Skipped` when the image size differs from
    ``cfg.expected_size`` or the pixels contain non-finite values.
    """
    pixels = np.asarray(image.pixels, dtype=np.float64)
    if pixels.shape != cfg.expected_size:
        return Skipped(record_id, f"irregular size {pixels.shape}, expected {cfg.expected_size}")
    if not np.all(np.isfinite(pixels)):
        return Skipped(record_id, "non-finite pixel values")
    rows, cols = cfg.grid
    row_blocks = np.array_split(pixels, rows, axis=0)
    vectors = []
    for r, row_block in enumerate(row_blocks):
        for c, cell in enumerate(np.array_split(row_block, cols, axis=1)):
            row_frac = r / (rows - 1) if rows > 1 else 0.0
            col_frac = c / (cols - 1) if cols > 1 else 0.0
            vectors.append(_cell_vector(cell, row_frac, col_frac, cfg.region_dim))
    regions = np.stack(vectors).astype(np.float32)
    return RegionFeatures(record_id=record_id, regions=regions)


def extract_batch(
    items: Iterable[tuple[int, SynthImage]], cfg: FeatureConfig
) -> tuple[list[RegionFeatures], list[Skipped]]:
    """Extract a batch; len(features) + len(skipped) == len(items) always."""
    features: list[RegionFeatures] = []
    skipped: list[Skipped] = []
    for record_id, image in items:
        result = extract(image, cfg, record_id=record_id)
        if isinstance(result, Skipped):
            skipped.append(result)
        else:
            features.append(result)
    return features, skipped


class FeatureStore:
    """In-memory id -> region features map with a binary file format.

    File layout: magic, n_regions, region_dim, record count (little-endian
    uint32), then per record an int64 id followed by the float32 region
    matrix, then a CRC32 of everything preceding it.
    """

    def __init__(self, n_regions: int, region_dim: int):
        self.n_regions = n_regions
        self.region_dim = region_dim
        self._by_id: dict[int, RegionFeatures] = {}

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._by_id

    def ids(self) -> list[int]:
        return list(self._by_id)

    def add(self, features: RegionFeatures, replace: bool = False) -> None:
        if features.regions.shape != (self.n_regions, self.region_dim):
            raise FeatureStoreError(
                f"record {features.record_id}: region shape {features.regions.shape} does not "
                f"match store ({self.n_regions}, {self.region_dim})"
            )
        if features.record_id in self._by_id and not replace:
            raise FeatureStoreError(f"duplicate record id {features.record_id}")
        self._by_id[features.record_id] = features

    def get(self, record_id: int) -> RegionFeatures:
        try:
            return self._by_id[record_id]
        except KeyError:
            raise MissingFeaturesError(f"no features stored for record id {record_id}") from None

    def all(self) -> list[RegionFeatures]:
        return list(self._by_id.values())

    @classmethod
    def from_features(
        cls, features: Iterable[RegionFeatures], n_regions: int, region_dim: int
    ) -> "FeatureStore":
        store = cls(n_regions, region_dim)
        for rf in features:
            store.add(rf)
        return store

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = bytearray()
        payload += _MAGIC
        payload += struct.pack("<III", self.n_regions, self.region_dim, len(self._by_id))
        for record_id, rf in self._by_id.items():
            payload += struct.pack("<q", record_id)
            payload += rf.regions.astype("<f4").tobytes()
        payload += struct.pack("<I", zlib.crc32(bytes(payload)))
        path.write_bytes(bytes(payload))

    @classmethod
    def read(cls, path: str | Path) -> "FeatureStore":
        data = Path(path).read_bytes()
        if len(data) < 20 or data[:4] != _MAGIC:
            raise FeatureStoreError(f"not a feature store file: {path}")
        stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
        if zlib.crc32(data[:-4]) != stored_crc:
            raise FeatureStoreError(f"checksum mismatch in {path}")
        n_regions, region_dim, count = struct.unpack_from("<III", data, 4)
        store = cls(n_regions, region_dim)
        offset = 16
        record_bytes = 8 + 4 * n_regions * region_dim
        if len(data) != 16 + count * record_bytes + 4:
            raise FeatureStoreError(f"truncated feature store: {path}")
        for _ in range(count):
            record_id = struct.unpack_from("<q", data, offset)[0]
            regions = np.frombuffer(
                data, dtype="<f4", count=n_regions * region_dim, offset=offset + 8
            ).reshape(n_regions, region_dim)
            store.add(RegionFeatures(record_id=record_id, regions=regions.copy()))
            offset += record_bytes
        return store


def store_write(features: Iterable[RegionFeatures], path: str | Path, cfg: FeatureConfig) -> None:
    """Persist a feature sequence (unique ids enforced)."""
    FeatureStore.from_features(features, cfg.n_regions, cfg.region_dim).write(path)


def store_read(path: str | Path, record_id: int) -> RegionFeatures:
    """Read one record's features back; missing id is an error."""
    return FeatureStore.read(path).get(record_id)

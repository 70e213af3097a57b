"""Strong augmentation for selected pseudo-labeled records.

The only transform is cutout: a contiguous block covering exactly
round(frac*H*W) pixels, placed uniformly at random and set to a
constant fill. The block is an axis-aligned rectangle whenever the
area has a divisor pair fitting the frame; otherwise (prime areas
longer than both sides) it is a near-square footprint whose last row
is partial, so the masked count still comes out exact. Augmenting a
set derives each record's seed from (seed, id), so results do not
depend on iteration order. A weak-augmentation hook exists but is the
identity.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .synth import SynthImage

_DOMAIN_AUGMENT = 3


def _cutout_geometry(area: int, height: int, width: int) -> tuple[int, int, int]:
    """(footprint_rows, footprint_cols, last_row_cols) covering ``area``.

    Prefers the most-square divisor pair of ``area`` that fits the
    frame (tied orientations prefer rows <= cols); when none fits, the
    footprint is the most-square shape whose final row holds only
    ``last_row_cols`` cells. last_row_cols == footprint_cols means the
    block is a full rectangle.
    """
    best: tuple[int, int] | None = None
    for rows in range(1, height + 1):
        if area % rows:
            continue
        cols = area // rows
        if cols > width:
            continue
        if (
            best is None
            or abs(rows - cols) < abs(best[0] - best[1])
            or (abs(rows - cols) == abs(best[0] - best[1]) and rows < best[0])
        ):
            best = (rows, cols)
    if best is not None:
        return best[0], best[1], best[1]
    ragged: tuple[int, int] | None = None
    for cols in range(1, width + 1):
        rows = -(-area // cols)  # ceil
        if rows > height:
            continue
        if (
            ragged is None
            or abs(rows - cols) < abs(ragged[0] - ragged[1])
            or (abs(rows - cols) == abs(ragged[0] - ragged[1]) and rows <= cols and ragged[0] > ragged[1])
        ):
            ragged = (rows, cols)
    assert ragged is not None  # cols=width always admits rows <= height
    rows, cols = ragged
    return rows, cols, area - (rows - 1) * cols


def cutout(image: SynthImage, frac: float, fill: float = 0.0, seed: int = 0) -> SynthImage:
    """Mask one uniformly placed block of exactly round(frac*H*W) pixels.

    Pixels outside the block are bit-identical to the input; frac=0
    returns an identical copy and frac=1 a constant image.
    """
    if not (0.0 <= frac <= 1.0):
        raise ValueError(f"frac must be in [0, 1], got {frac}")
    height, width = image.pixels.shape
    area = int(round(frac * height * width))
    pixels = image.pixels.copy()
    if area > 0:
        rows, cols, last = _cutout_geometry(area, height, width)
        rng = np.random.default_rng(np.random.SeedSequence((_DOMAIN_AUGMENT, seed)))
        top = int(rng.integers(0, height - rows + 1))
        left = int(rng.integers(0, width - cols + 1))
        pixels[top : top + rows - 1, left : left + cols] = fill
        pixels[top + rows - 1, left : left + last] = fill
    return SynthImage(pixels=pixels, concept_bit=image.concept_bit, concept_id=image.concept_id)


def weak_augment(image: SynthImage) -> SynthImage:
    """Identity hook: no weak transform is applied in this pipeline."""
    return image


def augment_set(
    records: Iterable,
    images: dict[int, SynthImage],
    frac: float = 0.25,
    fill: float = 0.0,
    seed: int = 0,
) -> dict[int, SynthImage]:
    """Cutout each record's image; returns id -> augmented image.

    Per-record randomness comes from (seed, id), so permuting the input
    yields identical per-id outputs. Raises KeyError when a record has
    no image.
    """
    out: dict[int, SynthImage] = {}
    for rec in records:
        if rec.id not in images:
            raise KeyError(f"record {rec.id} has no image")
        per_record = np.random.SeedSequence((seed, rec.id)).generate_state(1)[0]
        out[rec.id] = cutout(images[rec.id], frac=frac, fill=fill, seed=int(per_record))
    return out

"""Enumerated spectrogram masking.

Training images are expanded by applying at most one single-column time
mask and one single-row frequency mask, filled with the image's pre-mask
mean. All variants are enumerated exhaustively (no random sampling), so an
8x3 image yields 4 x 9 = 36 variants including the unmasked original.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import NO_MASK, ImageSet
from .preprocess import Spectrogram


class AugmentMode(str, Enum):
    NONE = "none"
    TIME_ONLY = "time"
    FREQ_ONLY = "freq"
    FULL = "full"


@dataclass(frozen=True)
class MaskVariant:
    time_col: int | None = None
    freq_row: int | None = None


def enumerate_variants(rows: int, cols: int, mode: AugmentMode) -> list[MaskVariant]:
    """All mask variants for an image of the given shape, (none, none) first.

    Order is deterministic: time index ascending in the outer position,
    frequency index ascending in the inner one, with "no mask" preceding
    index 0 on each axis.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"image must be at least 1x1, got {rows}x{cols}")
    mode = AugmentMode(mode)
    time_options: list[int | None] = [None]
    freq_options: list[int | None] = [None]
    if mode in (AugmentMode.TIME_ONLY, AugmentMode.FULL):
        time_options += list(range(cols))
    if mode in (AugmentMode.FREQ_ONLY, AugmentMode.FULL):
        freq_options += list(range(rows))
    return [MaskVariant(t, f) for t in time_options for f in freq_options]


def mask_values(values: np.ndarray, variant: MaskVariant) -> np.ndarray:
    """Apply a mask variant to a 2-D array, filling with the pre-mask mean."""
    rows, cols = values.shape
    if variant.time_col is not None and not 0 <= variant.time_col < cols:
        raise IndexError(f"time mask column {variant.time_col} out of range for {cols} columns")
    if variant.freq_row is not None and not 0 <= variant.freq_row < rows:
        raise IndexError(f"frequency mask row {variant.freq_row} out of range for {rows} rows")
    out = values.copy()
    if variant.time_col is None and variant.freq_row is None:
        return out
    fill = values.mean()  # computed once, before either mask is applied
    if variant.time_col is not None:
        out[:, variant.time_col] = fill
    if variant.freq_row is not None:
        out[variant.freq_row, :] = fill
    return out


def apply_mask(image: Spectrogram, variant: MaskVariant) -> Spectrogram:
    """Mask a spectrogram's column and/or row with its average value."""
    return Spectrogram(
        values=mask_values(image.values, variant),
        row_freqs_hz=image.row_freqs_hz.copy(),
        col_times_s=image.col_times_s.copy(),
        normalized=image.normalized,
    )


def expand_dataset(images: ImageSet, mode: AugmentMode) -> ImageSet:
    """Expand an image set with every mask variant, copying labels and provenance."""
    if len(images) == 0:
        raise ValueError("cannot expand an empty image set")
    rows, cols = images.image_shape
    variants = enumerate_variants(rows, cols, mode)
    n, k = len(images), len(variants)

    out = np.empty((n * k, rows, cols), dtype=images.images.dtype)
    time_mask = np.empty(n * k, dtype=np.int16)
    freq_mask = np.empty(n * k, dtype=np.int16)
    for j, v in enumerate(variants):
        block = images.images.copy()
        if v.time_col is not None or v.freq_row is not None:
            fill = images.images.mean(axis=(1, 2))
            if v.time_col is not None:
                block[:, :, v.time_col] = fill[:, None]
            if v.freq_row is not None:
                block[:, v.freq_row, :] = fill[:, None]
        out[j::k] = block
        time_mask[j::k] = NO_MASK if v.time_col is None else v.time_col
        freq_mask[j::k] = NO_MASK if v.freq_row is None else v.freq_row

    rep = np.repeat(np.arange(n), k)
    return ImageSet(
        images=out,
        class_idx=images.class_idx[rep],
        stimulus_hz=images.stimulus_hz[rep],
        subject_id=images.subject_id[rep],
        trial_index=images.trial_index[rep],
        start_sample=images.start_sample[rep],
        row_freqs_hz=images.row_freqs_hz,
        time_mask=time_mask,
        freq_mask=freq_mask,
    )

"""Labeled dataset containers produced by the preprocessing pipeline.

ImageSet holds spectrogram images plus per-image provenance (subject,
trial, window offset, applied masks) and round-trips through a fixed
little-endian container ("SIMG") so CLI stages can hand data to each other.
WindowSet holds raw window slices for the training-free correlation
classifier.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binio

SIMG_MAGIC = b"SIMG"
SIMG_VERSION = 1

NO_MASK = -1


@dataclass
class ImageSet:
    """Spectrogram images [n, rows, cols] with labels and window provenance."""

    images: np.ndarray
    class_idx: np.ndarray
    stimulus_hz: np.ndarray
    subject_id: np.ndarray
    trial_index: np.ndarray
    start_sample: np.ndarray
    row_freqs_hz: np.ndarray
    time_mask: np.ndarray = field(default=None)  # type: ignore[assignment]
    freq_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        if self.images.ndim != 3:
            raise ValueError(f"images must be [n, rows, cols], got shape {self.images.shape}")
        n = self.images.shape[0]
        self.class_idx = np.asarray(self.class_idx, dtype=np.int16)
        self.stimulus_hz = np.asarray(self.stimulus_hz, dtype=np.float32)
        self.subject_id = np.asarray(self.subject_id, dtype=np.uint16)
        self.trial_index = np.asarray(self.trial_index, dtype=np.uint16)
        self.start_sample = np.asarray(self.start_sample, dtype=np.uint32)
        self.row_freqs_hz = np.asarray(self.row_freqs_hz, dtype=np.float32)
        if self.time_mask is None:
            self.time_mask = np.full(n, NO_MASK, dtype=np.int16)
        if self.freq_mask is None:
            self.freq_mask = np.full(n, NO_MASK, dtype=np.int16)
        self.time_mask = np.asarray(self.time_mask, dtype=np.int16)
        self.freq_mask = np.asarray(self.freq_mask, dtype=np.int16)
        for name in ("class_idx", "stimulus_hz", "subject_id", "trial_index",
                     "start_sample", "time_mask", "freq_mask"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries for {n} images")
        if len(self.row_freqs_hz) != self.images.shape[1]:
            raise ValueError("row_freqs_hz length must match image row count")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_shape(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]

    def subset(self, indices: np.ndarray) -> "ImageSet":
        indices = np.asarray(indices)
        return ImageSet(
            images=self.images[indices],
            class_idx=self.class_idx[indices],
            stimulus_hz=self.stimulus_hz[indices],
            subject_id=self.subject_id[indices],
            trial_index=self.trial_index[indices],
            start_sample=self.start_sample[indices],
            row_freqs_hz=self.row_freqs_hz,
            time_mask=self.time_mask[indices],
            freq_mask=self.freq_mask[indices],
        )

    def source_keys(self) -> set[tuple[int, float, int, int]]:
        """Window identities (subject, stimulus, trial, start) ignoring masks."""
        return {
            (int(s), float(f), int(t), int(o))
            for s, f, t, o in zip(self.subject_id, self.stimulus_hz,
                                  self.trial_index, self.start_sample)
        }

    def class_counts(self) -> dict[int, int]:
        classes, counts = np.unique(self.class_idx, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}


def imageset_to_bytes(s: ImageSet) -> bytes:
    n = len(s)
    rows, cols = s.image_shape
    parts = [
        SIMG_MAGIC,
        binio.pack_u8(SIMG_VERSION),
        binio.pack_u32(n),
        binio.pack_u16(rows),
        binio.pack_u16(cols),
        binio.pack_f32_array(s.row_freqs_hz),
        binio.pack_f32_array(s.images),
        binio.pack_i16_array(s.class_idx),
        binio.pack_f32_array(s.stimulus_hz),
        binio.pack_u16_array(s.subject_id),
        binio.pack_u16_array(s.trial_index),
        binio.pack_u32_array(s.start_sample),
        binio.pack_i16_array(s.time_mask),
        binio.pack_i16_array(s.freq_mask),
    ]
    return b"".join(parts)


def imageset_from_bytes(data: bytes) -> ImageSet:
    r = binio.ByteReader(data)
    r.expect_magic(SIMG_MAGIC)
    r.expect_version(SIMG_VERSION)
    n = r.u32()
    rows = r.u16()
    cols = r.u16()
    row_freqs = r.f32_array(rows)
    images = r.f32_array(n * rows * cols).reshape(n, rows, cols)
    class_idx = r.i16_array(n)
    stimulus_hz = r.f32_array(n)
    subject_id = r.u16_array(n)
    trial_index = r.u16_array(n)
    start_sample = r.u32_array(n)
    time_mask = r.i16_array(n)
    freq_mask = r.i16_array(n)
    return ImageSet(
        images=images,
        class_idx=class_idx,
        stimulus_hz=stimulus_hz,
        subject_id=subject_id,
        trial_index=trial_index,
        start_sample=start_sample,
        row_freqs_hz=row_freqs,
        time_mask=time_mask,
        freq_mask=freq_mask,
    )


def save_imageset(s: ImageSet, path: str | Path) -> None:
    Path(path).write_bytes(imageset_to_bytes(s))


def load_imageset(path: str | Path) -> ImageSet:
    return imageset_from_bytes(Path(path).read_bytes())


@dataclass
class WindowSet:
    """Raw multichannel window slices [n, n_channels, window_len] with labels."""

    windows: np.ndarray
    class_idx: np.ndarray
    stimulus_hz: np.ndarray
    subject_id: np.ndarray
    trial_index: np.ndarray
    start_sample: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float64)
        if self.windows.ndim != 3:
            raise ValueError(
                f"windows must be [n, channels, samples], got shape {self.windows.shape}"
            )
        n = self.windows.shape[0]
        self.class_idx = np.asarray(self.class_idx, dtype=np.int16)
        self.stimulus_hz = np.asarray(self.stimulus_hz, dtype=np.float32)
        self.subject_id = np.asarray(self.subject_id, dtype=np.uint16)
        self.trial_index = np.asarray(self.trial_index, dtype=np.uint16)
        self.start_sample = np.asarray(self.start_sample, dtype=np.uint32)
        for name in ("class_idx", "stimulus_hz", "subject_id", "trial_index", "start_sample"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries for {n} windows")

    def __len__(self) -> int:
        return self.windows.shape[0]

    def subset(self, indices: np.ndarray) -> "WindowSet":
        indices = np.asarray(indices)
        return WindowSet(
            windows=self.windows[indices],
            class_idx=self.class_idx[indices],
            stimulus_hz=self.stimulus_hz[indices],
            subject_id=self.subject_id[indices],
            trial_index=self.trial_index[indices],
            start_sample=self.start_sample[indices],
            sample_rate_hz=self.sample_rate_hz,
        )

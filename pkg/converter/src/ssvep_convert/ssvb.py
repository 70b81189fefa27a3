"""Writer for the SSVB trial-container format (version 1).

Layout, little-endian throughout:

    magic "SSVB" | u8 version | f32 sample_rate_hz | u16 n_channels
    | per channel: u16 name_len + UTF-8 name | u32 n_trials
    | per trial: u16 subject_id | f32 stimulus_hz | u16 trial_index
      | u32 n_samples | f32 samples, channel-major

This is an independent implementation kept byte-compatible with the
consumer package; the golden-byte test pins the equivalence.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

SSVB_MAGIC = b"SSVB"
SSVB_VERSION = 1


class TrialRecord(NamedTuple):
    subject_id: int
    stimulus_hz: float
    trial_index: int
    samples: np.ndarray  # [n_channels x n_samples], converted to f32 on write


def store_bytes(
    sample_rate_hz: float, channel_names: Iterable[str], trials: Iterable[TrialRecord]
) -> bytes:
    channel_names = list(channel_names)
    parts = [
        SSVB_MAGIC,
        struct.pack("<B", SSVB_VERSION),
        struct.pack("<f", sample_rate_hz),
        struct.pack("<H", len(channel_names)),
    ]
    for name in channel_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    trials = list(trials)
    parts.append(struct.pack("<I", len(trials)))
    for t in trials:
        samples = np.ascontiguousarray(t.samples, dtype="<f4")
        if samples.ndim != 2 or samples.shape[0] != len(channel_names):
            raise ValueError(
                f"trial for subject {t.subject_id} has shape {samples.shape}, "
                f"expected [{len(channel_names)} x n]"
            )
        parts.append(struct.pack("<H", t.subject_id))
        parts.append(struct.pack("<f", t.stimulus_hz))
        parts.append(struct.pack("<H", t.trial_index))
        parts.append(struct.pack("<I", samples.shape[1]))
        parts.append(samples.tobytes())
    return b"".join(parts)


def write_store(
    path: str | Path,
    sample_rate_hz: float,
    channel_names: Iterable[str],
    trials: Iterable[TrialRecord],
) -> None:
    Path(path).write_bytes(store_bytes(sample_rate_hz, channel_names, trials))

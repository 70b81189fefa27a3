"""Domain types and the SSVB trial-container file format.

A trial store holds raw multichannel EEG trials that share one sampling
rate and one channel table. The on-disk layout (version 1) is fixed and
little-endian so that writes are byte-reproducible:

    magic "SSVB" | u8 version | f32 sample_rate_hz | u16 n_channels
    | per channel: u16 name_len + UTF-8 name | u32 n_trials
    | per trial: u16 subject_id | f32 stimulus_hz | u16 trial_index
      | u32 n_samples | f32 samples, channel-major
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import binio

SSVB_MAGIC = b"SSVB"
SSVB_VERSION = 1

# Occipital/parietal montage used for the multichannel correlation classifier.
ELECTRODES_9 = ("Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2")


@dataclass(frozen=True, eq=False)
class RawTrial:
    """One recorded trial: a [n_channels x n_samples] voltage matrix plus labels.

    Samples keep their float dtype in memory; the container stores float32,
    so trials built from float32 data round-trip exactly through a file.
    Voltage units are whatever the recording used; downstream processing
    never depends on absolute scale.
    """

    subject_id: int
    stimulus_hz: float
    sample_rate_hz: float
    channels: tuple[str, ...]
    samples: np.ndarray
    trial_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        samples = np.asarray(self.samples)
        if samples.dtype not in (np.float32, np.float64):
            samples = samples.astype(np.float64)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D [channels x samples], got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)
        if self.subject_id < 1:
            raise ValueError(f"subject_id must be >= 1, got {self.subject_id}")
        if samples.shape[0] != len(self.channels):
            raise ValueError(
                f"{len(self.channels)} channel names but {samples.shape[0]} sample rows"
            )
        if samples.shape[0] < 1:
            raise ValueError("trial needs at least one channel")
        if samples.shape[1] < 1:
            raise ValueError("trial needs at least one sample")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError(f"channel names must be unique, got {self.channels}")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def channel(self, name: str) -> np.ndarray:
        """Return the sample vector of one named channel."""
        if name not in self.channels:
            raise KeyError(f"unknown channel {name!r}; available: {list(self.channels)}")
        return self.samples[self.channels.index(name)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawTrial):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.stimulus_hz == other.stimulus_hz
            and self.sample_rate_hz == other.sample_rate_hz
            and self.trial_index == other.trial_index
            and self.channels == other.channels
            and self.samples.shape == other.samples.shape
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class WindowSlice:
    """Fixed-length single-channel segment cut from a trial.

    Carries enough provenance (subject, stimulus, trial, start offset) to
    enforce subject-disjoint splits later in the pipeline.
    """

    subject_id: int
    stimulus_hz: float
    trial_index: int
    start_sample: int
    samples: np.ndarray
    sample_rate_hz: float

    @property
    def source(self) -> tuple[int, float, int, int]:
        return (self.subject_id, self.stimulus_hz, self.trial_index, self.start_sample)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Label:
    """Class index paired with its stimulus frequency."""

    class_index: int
    stimulus_hz: float


def class_frequencies(freqs: Sequence[float]) -> tuple[float, ...]:
    """Validate and sort the configured stimulus frequency set."""
    out = tuple(sorted(float(f) for f in freqs))
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate stimulus frequencies in {freqs}")
    if len(out) < 1:
        raise ValueError("need at least one stimulus frequency")
    return out


def label_for_frequency(f_hz: float, freqs: Sequence[float]) -> Label:
    """Map a stimulus frequency to its class label (ascending-order indexing)."""
    ordered = class_frequencies(freqs)
    if float(f_hz) not in ordered:
        raise ValueError(f"frequency {f_hz} not in configured set {ordered}")
    return Label(ordered.index(float(f_hz)), float(f_hz))


def label_for_class(class_index: int, freqs: Sequence[float]) -> Label:
    """Map a class index back to its stimulus frequency."""
    ordered = class_frequencies(freqs)
    if not 0 <= class_index < len(ordered):
        raise ValueError(f"class index {class_index} out of range for {ordered}")
    return Label(class_index, ordered[class_index])


@dataclass
class TrialStore:
    """A set of trials sharing one sampling rate and channel table."""

    sample_rate_hz: float
    channels: tuple[str, ...]
    trials: list[RawTrial] = field(default_factory=list)

    def __post_init__(self):
        self.channels = tuple(self.channels)
        for i, t in enumerate(self.trials):
            self._check_trial(i, t)

    def _check_trial(self, i: int, t: RawTrial) -> None:
        if t.sample_rate_hz != self.sample_rate_hz:
            raise ValueError(
                f"trial {i}: sample rate {t.sample_rate_hz} != store rate {self.sample_rate_hz}"
            )
        if t.channels != self.channels:
            raise ValueError(f"trial {i}: channels {t.channels} != store channels {self.channels}")

    def add(self, trial: RawTrial) -> None:
        self._check_trial(len(self.trials), trial)
        self.trials.append(trial)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def subject_ids(self) -> list[int]:
        return sorted({t.subject_id for t in self.trials})

    def stimulus_frequencies(self) -> tuple[float, ...]:
        return class_frequencies({t.stimulus_hz for t in self.trials})

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialStore):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.channels == other.channels
            and self.trials == other.trials
        )


def store_to_bytes(store: TrialStore) -> bytes:
    parts = [SSVB_MAGIC, binio.pack_u8(SSVB_VERSION), binio.pack_f32(store.sample_rate_hz)]
    parts.append(binio.pack_u16(len(store.channels)))
    for name in store.channels:
        parts.append(binio.pack_utf8(name))
    parts.append(binio.pack_u32(len(store.trials)))
    for t in store.trials:
        parts.append(binio.pack_u16(t.subject_id))
        parts.append(binio.pack_f32(t.stimulus_hz))
        parts.append(binio.pack_u16(t.trial_index))
        parts.append(binio.pack_u32(t.n_samples))
        parts.append(binio.pack_f32_array(t.samples))
    return b"".join(parts)


def store_from_bytes(data: bytes) -> TrialStore:
    r = binio.ByteReader(data)
    r.expect_magic(SSVB_MAGIC)
    r.expect_version(SSVB_VERSION)
    sample_rate = r.f32()
    n_channels = r.u16()
    channels = tuple(r.utf8() for _ in range(n_channels))
    n_trials = r.u32()
    trials = []
    for _ in range(n_trials):
        subject_id = r.u16()
        stimulus_hz = r.f32()
        trial_index = r.u16()
        n_samples = r.u32()
        samples = r.f32_array(n_channels * n_samples).reshape(n_channels, n_samples)
        trials.append(
            RawTrial(
                subject_id=subject_id,
                stimulus_hz=stimulus_hz,
                sample_rate_hz=sample_rate,
                channels=channels,
                samples=samples,
                trial_index=trial_index,
            )
        )
    return TrialStore(sample_rate_hz=sample_rate, channels=channels, trials=trials)


def save_store(store: TrialStore, path: str | Path) -> None:
    Path(path).write_bytes(store_to_bytes(store))


def load_store(path: str | Path) -> TrialStore:
    return store_from_bytes(Path(path).read_bytes())


def select_channels(trial: RawTrial, names: Iterable[str]) -> RawTrial:
    """Return a trial restricted to the requested channels, in requested order."""
    names = list(names)
    missing = [n for n in names if n not in trial.channels]
    if missing:
        raise KeyError(
            f"unknown channel(s) {missing}; available: {list(trial.channels)}"
        )
    rows = [trial.channels.index(n) for n in names]
    return RawTrial(
        subject_id=trial.subject_id,
        stimulus_hz=trial.stimulus_hz,
        sample_rate_hz=trial.sample_rate_hz,
        channels=tuple(names),
        samples=trial.samples[rows].copy(),
        trial_index=trial.trial_index,
    )

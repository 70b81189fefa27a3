"""Source-dataset layout: montage, condition indices and cue trimming.

The public 35-subject benchmark stores one MAT-file per subject holding a
[channels x samples x conditions x blocks] array. Everything this module
describes is configuration, not fact baked into code: channel order,
which condition index carries which stimulus frequency, and how many cue
samples to drop from each epoch. A JSON file can override any field; the
manifest records whatever layout a conversion actually used.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

REQUIRED_ELECTRODES = ("Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2")

# 64-channel montage of the benchmark recordings, in recording order.
BENCHMARK_CHANNELS = (
    "Fp1", "Fpz", "Fp2", "AF3", "AF4", "F7", "F5", "F3", "F1", "Fz",
    "F2", "F4", "F6", "F8", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2",
    "FC4", "FC6", "FT8", "T7", "C5", "C3", "C1", "Cz", "C2", "C4",
    "C6", "T8", "M1", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4",
    "CP6", "TP8", "M2", "P7", "P5", "P3", "P1", "Pz", "P2", "P4",
    "P6", "P8", "PO7", "PO5", "PO3", "POz", "PO4", "PO6", "PO8", "CB1",
    "O1", "Oz", "O2", "CB2",
)

# Condition order starts 8..15 Hz in 1 Hz steps before the 0.2 Hz offsets,
# so 12 Hz sits at index 4 and 15 Hz at index 7. Verify against the
# dataset's own frequency table before converting new data.
BENCHMARK_FREQUENCY_CONDITIONS = {12.0: 4, 15.0: 7}


@dataclass(frozen=True)
class BenchmarkLayout:
    channel_names: tuple[str, ...] = BENCHMARK_CHANNELS
    frequency_conditions: dict[float, int] = field(
        default_factory=lambda: dict(BENCHMARK_FREQUENCY_CONDITIONS)
    )
    sample_rate_hz: float = 250.0
    samples_per_trial: int = 1250
    trim_offset_samples: int = 125  # 0.5 s visual cue before stimulation
    data_key: str = "data"

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if len(set(self.channel_names)) != len(self.channel_names):
            raise ValueError("channel names must be unique")
        missing = [name for name in REQUIRED_ELECTRODES if name not in self.channel_names]
        if missing:
            raise ValueError(f"layout does not resolve required electrodes: {missing}")
        if not self.frequency_conditions:
            raise ValueError("layout needs at least one stimulus frequency")
        if self.samples_per_trial < 1 or self.trim_offset_samples < 0:
            raise ValueError("bad trial length / trim offset")

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def frequencies(self) -> list[float]:
        return sorted(self.frequency_conditions)

    def channel_index(self, name: str) -> int:
        return self.channel_names.index(name)

    def to_dict(self) -> dict:
        return {
            "channel_names": list(self.channel_names),
            "frequency_conditions": {f"{f:g}": i for f, i in self.frequency_conditions.items()},
            "sample_rate_hz": self.sample_rate_hz,
            "samples_per_trial": self.samples_per_trial,
            "trim_offset_samples": self.trim_offset_samples,
            "data_key": self.data_key,
        }


def load_layout(path: str | Path) -> BenchmarkLayout:
    """Load a layout JSON; absent keys fall back to the benchmark defaults."""
    document = json.loads(Path(path).read_text())
    if not isinstance(document, dict):
        raise ValueError(f"layout file {path} must hold a JSON object")
    known = {
        "channel_names", "frequency_conditions", "sample_rate_hz",
        "samples_per_trial", "trim_offset_samples", "data_key",
    }
    unknown = set(document) - known
    if unknown:
        raise ValueError(f"unknown layout key(s): {sorted(unknown)}")
    kwargs: dict = {}
    if "channel_names" in document:
        kwargs["channel_names"] = tuple(document["channel_names"])
    if "frequency_conditions" in document:
        kwargs["frequency_conditions"] = {
            float(f): int(i) for f, i in document["frequency_conditions"].items()
        }
    for key in ("sample_rate_hz", "samples_per_trial", "trim_offset_samples", "data_key"):
        if key in document:
            kwargs[key] = document[key]
    return BenchmarkLayout(**kwargs)

"""Batch conversion of per-subject MAT recordings into one SSVB store.

For every subject, the configured conditions are extracted (all channels
kept, cue samples trimmed), ordered by (subject, frequency ascending,
block), and written to a single store. Problems with individual files —
missing file, epoch too short, condition index out of range — are recorded
in the manifest without aborting the rest of the batch. Re-running on
unchanged inputs produces byte-identical outputs.
"""
from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .layout import BenchmarkLayout
from .matread import MatReadError, read_epoch_array
from .ssvb import TrialRecord, write_store


def subject_file(mat_dir: Path, subject_id: int) -> Path:
    return mat_dir / f"S{subject_id}.mat"


def discover_subjects(mat_dir: Path) -> list[int]:
    """Subject ids from S<N>.mat files, sorted numerically."""
    ids = []
    for path in mat_dir.glob("S*.mat"):
        match = re.fullmatch(r"S(\d+)\.mat", path.name)
        if match:
            ids.append(int(match.group(1)))
    return sorted(ids)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def extract_subject_trials(
    epochs: np.ndarray, layout: BenchmarkLayout, subject_id: int
) -> list[TrialRecord]:
    """Cut the labeled conditions out of one subject's epoch array."""
    n_ch, n_samples, n_cond, n_blocks = epochs.shape
    if n_ch != layout.n_channels:
        raise MatReadError(
            f"subject {subject_id}: {n_ch} channels, layout expects {layout.n_channels}"
        )
    lo = layout.trim_offset_samples
    hi = lo + layout.samples_per_trial
    if n_samples < hi:
        raise MatReadError(
            f"subject {subject_id}: epochs hold {n_samples} samples, "
            f"need {hi} (offset {lo} + {layout.samples_per_trial})"
        )
    trials = []
    for freq in layout.frequencies():
        cond = layout.frequency_conditions[freq]
        if not 0 <= cond < n_cond:
            raise MatReadError(
                f"subject {subject_id}: condition index {cond} for {freq:g} Hz "
                f"out of range (file has {n_cond} conditions)"
            )
        for block in range(n_blocks):
            samples = np.ascontiguousarray(epochs[:, lo:hi, cond, block], dtype=np.float32)
            trials.append(TrialRecord(subject_id, freq, block, samples))
    return trials


def convert_directory(
    mat_dir: str | Path,
    out_path: str | Path,
    layout: BenchmarkLayout | None = None,
    subjects: list[int] | None = None,
    manifest_path: str | Path | None = None,
    jobs: int = 1,
) -> dict:
    """Convert a directory of per-subject MAT-files; returns the manifest."""
    mat_dir = Path(mat_dir)
    layout = layout or BenchmarkLayout()
    if subjects is None:
        subjects = discover_subjects(mat_dir)
    if not subjects:
        raise MatReadError(f"no subject files (S<N>.mat) found in {mat_dir}")

    def load_one(subject_id: int):
        path = subject_file(mat_dir, subject_id)
        if not path.exists():
            raise MatReadError(f"missing subject file {path.name}")
        checksum = _sha256(path)
        trials = extract_subject_trials(
            read_epoch_array(path, layout.data_key), layout, subject_id
        )
        return path.name, checksum, trials

    results: dict[int, tuple[str, str, list[TrialRecord]]] = {}
    errors: list[dict] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {s: pool.submit(load_one, s) for s in subjects}
            outcomes = {s: f for s, f in futures.items()}
    else:
        outcomes = None

    for subject_id in subjects:  # assembly stays in subject order
        try:
            if outcomes is not None:
                results[subject_id] = outcomes[subject_id].result()
            else:
                results[subject_id] = load_one(subject_id)
        except MatReadError as exc:
            errors.append({"subject": subject_id, "error": str(exc)})

    all_trials: list[TrialRecord] = []
    counts: dict[str, dict[str, int]] = {}
    checksums: dict[str, str] = {}
    for subject_id in subjects:
        if subject_id not in results:
            continue
        name, checksum, trials = results[subject_id]
        checksums[name] = checksum
        per_freq: dict[str, int] = {}
        for t in trials:
            per_freq[f"{t.stimulus_hz:g}"] = per_freq.get(f"{t.stimulus_hz:g}", 0) + 1
        counts[str(subject_id)] = per_freq
        all_trials.extend(trials)

    if not all_trials:
        raise MatReadError(
            "no trials converted; first error: "
            + (errors[0]["error"] if errors else "no input")
        )
    write_store(out_path, layout.sample_rate_hz, layout.channel_names, all_trials)

    manifest = {
        "format": f"SSVB v{1}",
        "output": Path(out_path).name,
        "n_trials": len(all_trials),
        "n_channels": layout.n_channels,
        "samples_per_trial": layout.samples_per_trial,
        "layout": layout.to_dict(),
        "counts_per_subject": counts,
        "source_checksums": checksums,
        "errors": errors,
    }
    if manifest_path is not None:
        Path(manifest_path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest

"""Synthetic SSVEP-like trial generation.

Each trial is a sum of harmonics of the stimulus frequency plus white
Gaussian noise scaled to a target SNR. Used as the desk-scale data source
and as a classification oracle: at high SNR the stimulus frequency is
recoverable by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RawTrial, TrialStore


@dataclass(frozen=True)
class SynthConfig:
    stimulus_hz: float
    n_harmonics: int = 1
    amplitude_decay: float = 0.0  # harmonic k has amplitude k**-decay
    snr_db: float = math.inf
    duration_s: float = 5.0
    sample_rate_hz: float = 250.0
    seed: int = 0

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError(f"n_harmonics must be >= 1, got {self.n_harmonics}")
        if self.amplitude_decay < 0:
            raise ValueError(f"amplitude_decay must be >= 0, got {self.amplitude_decay}")
        if self.n_harmonics * self.stimulus_hz >= self.sample_rate_hz / 2:
            raise ValueError(
                f"highest harmonic {self.n_harmonics * self.stimulus_hz} Hz exceeds "
                f"Nyquist {self.sample_rate_hz / 2} Hz"
            )
        n = self.duration_s * self.sample_rate_hz
        if n <= 0 or abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"duration_s * sample_rate_hz must be a positive integer, got {n}"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def _trial_rng(cfg: SynthConfig, subject_id: int, trial_index: int) -> np.random.Generator:
    # Distinct (seed, subject, trial) triples get independent streams.
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, subject_id, trial_index]))


def generate_components(
    cfg: SynthConfig, subject_id: int, trial_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Return the clean harmonic signal and the noise part separately.

    The trial itself is their sum; keeping the parts separate lets tests
    measure the realized SNR directly.
    """
    rng = _trial_rng(cfg, subject_id, trial_index)
    t = np.arange(cfg.n_samples, dtype=np.float64) / cfg.sample_rate_hz
    phases = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_harmonics)
    clean = np.zeros(cfg.n_samples, dtype=np.float64)
    for k in range(1, cfg.n_harmonics + 1):
        amp = float(k) ** (-cfg.amplitude_decay)
        clean += amp * np.sin(2.0 * np.pi * k * cfg.stimulus_hz * t + phases[k - 1])

    if math.isinf(cfg.snr_db):
        noise = np.zeros_like(clean)
    else:
        signal_power = float(np.mean(clean**2))
        sigma = math.sqrt(signal_power / 10.0 ** (cfg.snr_db / 10.0))
        noise = sigma * rng.standard_normal(cfg.n_samples)
    return clean, noise


def generate_trial(cfg: SynthConfig, subject_id: int, trial_index: int) -> RawTrial:
    """Generate one single-channel trial, deterministic in (seed, subject, trial)."""
    clean, noise = generate_components(cfg, subject_id, trial_index)
    # float32 to match the trial-container sample format bit-for-bit
    return RawTrial(
        subject_id=subject_id,
        stimulus_hz=cfg.stimulus_hz,
        sample_rate_hz=cfg.sample_rate_hz,
        channels=("Oz",),
        samples=(clean + noise)[np.newaxis, :].astype(np.float32),
        trial_index=trial_index,
    )


def generate_store(
    freqs: tuple[float, ...] = (12.0, 15.0),
    n_subjects: int = 35,
    trials_per_freq: int = 6,
    snr_db: float = math.inf,
    seed: int = 0,
    n_harmonics: int = 2,
    amplitude_decay: float = 1.0,
    duration_s: float = 5.0,
    sample_rate_hz: float = 250.0,
) -> TrialStore:
    """Build a full synthetic store: n_subjects x len(freqs) x trials_per_freq trials."""
    store = TrialStore(sample_rate_hz=sample_rate_hz, channels=("Oz",))
    for subject_id in range(1, n_subjects + 1):
        for f in freqs:
            cfg = SynthConfig(
                stimulus_hz=f,
                n_harmonics=n_harmonics,
                amplitude_decay=amplitude_decay,
                snr_db=snr_db,
                duration_s=duration_s,
                sample_rate_hz=sample_rate_hz,
                seed=seed,
            )
            for trial_index in range(trials_per_freq):
                store.add(generate_trial(cfg, subject_id, trial_index))
    return store

"""Filter bank canonical correlation analysis over raw window slices.

Each window is band-pass filtered into N sub-bands; per sub-band, the
largest canonical correlation against sinusoidal harmonic references of a
candidate frequency is computed, and the squared correlations are combined
with weights w(n) = n**-a + b. The candidate with the largest combined
score wins. Works on single-channel and multichannel windows alike.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Label, label_for_frequency

# Relative singular-value cutoff below which a data direction is treated as null.
RANK_TOL = 1e-12


@dataclass(frozen=True)
class FbccaConfig:
    n_subbands: int = 7
    weight_a: float = 1.25
    weight_b: float = 0.25
    n_harmonics: int = 5
    candidate_freqs_hz: tuple[float, ...] = (12.0, 15.0)
    subband_edges_hz: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.n_subbands < 1:
            raise ValueError(f"n_subbands must be >= 1, got {self.n_subbands}")
        if self.n_harmonics < 1:
            raise ValueError(f"n_harmonics must be >= 1, got {self.n_harmonics}")
        if len(self.candidate_freqs_hz) < 2:
            raise ValueError("need at least 2 candidate frequencies")
        if self.subband_edges_hz is not None:
            edges = tuple((float(lo), float(hi)) for lo, hi in self.subband_edges_hz)
            object.__setattr__(self, "subband_edges_hz", edges)
            if len(edges) != self.n_subbands:
                raise ValueError(
                    f"{len(edges)} sub-band edges given for n_subbands={self.n_subbands}"
                )
            los = [lo for lo, _ in edges]
            if los != sorted(los):
                raise ValueError(f"sub-band lower edges must ascend, got {los}")

    def subband_edges(self) -> tuple[tuple[float, float], ...]:
        """Sub-band passbands; by default the n-th band spans [8n, 88] Hz."""
        if self.subband_edges_hz is not None:
            return self.subband_edges_hz
        return tuple((8.0 * n, 88.0) for n in range(1, self.n_subbands + 1))

    def subband_weights(self) -> np.ndarray:
        n = np.arange(1, self.n_subbands + 1, dtype=np.float64)
        return n ** (-self.weight_a) + self.weight_b


def reference_signals(
    f_hz: float, n_harmonics: int, n_samples: int, sample_rate_hz: float
) -> np.ndarray:
    """Harmonic sine/cosine reference matrix [2*n_harmonics x n_samples].

    Rows come in (sin k, cos k) pairs for k = 1..n_harmonics, sampled at
    t = 0, 1/fs, 2/fs, ...
    """
    if n_harmonics * f_hz >= sample_rate_hz / 2:
        raise ValueError(
            f"harmonic {n_harmonics} of {f_hz} Hz exceeds Nyquist {sample_rate_hz / 2} Hz"
        )
    t = np.arange(n_samples, dtype=np.float64) / sample_rate_hz
    rows = []
    for k in range(1, n_harmonics + 1):
        rows.append(np.sin(2.0 * np.pi * k * f_hz * t))
        rows.append(np.cos(2.0 * np.pi * k * f_hz * t))
    return np.vstack(rows)


def subband_filter(
    x: np.ndarray, band: tuple[float, float], sample_rate_hz: float
) -> np.ndarray:
    """Zero-phase brick-wall band-pass via the rFFT along the last axis.

    Bins with frequency outside [lo, hi] are zeroed; output length equals
    input length.
    """
    lo, hi = band
    if not 0 <= lo < hi <= sample_rate_hz / 2:
        raise ValueError(f"band ({lo}, {hi}) invalid for sample rate {sample_rate_hz}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    keep = (freqs >= lo) & (freqs <= hi)
    if not keep.any():
        raise ValueError(f"band ({lo}, {hi}) contains no FFT bins for length {n}")
    spectrum = np.fft.rfft(x, axis=-1)
    spectrum[..., ~keep] = 0.0
    return np.fft.irfft(spectrum, n=n, axis=-1)


def _orthonormal_basis(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the centered row space, null directions dropped.

    Input is [n_vars x T]; output is [T x rank] with orthonormal columns.
    """
    centered = rows - rows.mean(axis=1, keepdims=True)
    u, s, _ = np.linalg.svd(centered.T, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return u[:, :0]
    return u[:, s > RANK_TOL * s[0]]


def cca_max_corr(X: np.ndarray, Y: np.ndarray) -> float:
    """Largest canonical correlation between the row spaces of X and Y.

    Rows are centered, orthonormalized (dropping null directions), and the
    correlation is the largest singular value of the product of the two
    orthonormal factors, clamped to [0, 1].
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"X and Y disagree on sample count: {X.shape[1]} vs {Y.shape[1]}")
    t = X.shape[1]
    if t <= X.shape[0] + Y.shape[0]:
        raise ValueError(
            f"need more samples than variables: T={t}, Cx+Cy={X.shape[0] + Y.shape[0]}"
        )
    qx = _orthonormal_basis(X)
    qy = _orthonormal_basis(Y)
    if qx.shape[1] == 0 or qy.shape[1] == 0:
        return 0.0
    rho = float(np.linalg.svd(qx.T @ qy, compute_uv=False)[0])
    return min(max(rho, 0.0), 1.0)


def fbcca_score(
    x: np.ndarray, f_hz: float, cfg: FbccaConfig, sample_rate_hz: float
) -> float:
    """Weighted sum of squared per-sub-band correlations for one candidate."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    refs = reference_signals(f_hz, cfg.n_harmonics, x.shape[-1], sample_rate_hz)
    weights = cfg.subband_weights()
    score = 0.0
    for w, band in zip(weights, cfg.subband_edges()):
        rho = cca_max_corr(subband_filter(x, band, sample_rate_hz), refs)
        score += w * rho**2
    return score


def fbcca_classify(
    x: np.ndarray, cfg: FbccaConfig = FbccaConfig(), sample_rate_hz: float = 250.0
) -> Label:
    """Pick the candidate frequency with the largest score, lower one on ties."""
    freqs = sorted(cfg.candidate_freqs_hz)
    best_f, best_score = freqs[0], -np.inf
    for f in freqs:
        score = fbcca_score(x, f, cfg, sample_rate_hz)
        if score > best_score:
            best_f, best_score = f, score
    return label_for_frequency(best_f, cfg.candidate_freqs_hz)

"""Raw-trial to model-input transforms.

The chain for the image classifiers is: common-average-reference filter on
the full multichannel trial, channel selection, window slicing, short-time
Fourier transform, band selection, dB conversion with per-image min-max
normalization, and (for the CNN) nearest-neighbor resizing. The correlation
classifier consumes the window slices directly, without the STFT.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import RawTrial, WindowSlice

DEFAULT_BANDS = ((10.0, 18.0), (22.0, 26.0), (28.0, 32.0))
DB_FLOOR_EPS = 1e-10

WINDOW_FNS = ("rectangular", "hann", "blackman")


@dataclass(frozen=True)
class WindowConfig:
    window_len_samples: int = 125
    displacement_samples: int = 125

    def __post_init__(self):
        if self.displacement_samples <= 0:
            raise ValueError(f"displacement must be positive, got {self.displacement_samples}")
        if self.window_len_samples < self.displacement_samples:
            raise ValueError(
                f"displacement {self.displacement_samples} exceeds window "
                f"{self.window_len_samples}"
            )


@dataclass(frozen=True)
class StftConfig:
    fft_window_len: int = 125
    hop: int = 62
    window_fn: str = "rectangular"
    db_floor_eps: float = DB_FLOOR_EPS

    def __post_init__(self):
        if not 0 < self.hop <= self.fft_window_len:
            raise ValueError(f"hop must be in (0, {self.fft_window_len}], got {self.hop}")
        if self.window_fn not in WINDOW_FNS:
            raise ValueError(f"window_fn must be one of {WINDOW_FNS}, got {self.window_fn!r}")


@dataclass(frozen=True)
class BandSpec:
    """Half-open [lo, hi) frequency intervals; bins inside any interval are kept."""

    intervals: tuple[tuple[float, float], ...] = DEFAULT_BANDS

    def __post_init__(self):
        intervals = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "intervals", intervals)
        prev_hi = -np.inf
        for lo, hi in intervals:
            if hi <= lo:
                raise ValueError(f"empty interval [{lo}, {hi})")
            if lo < prev_hi:
                raise ValueError(f"intervals must be disjoint and ascending: {intervals}")
            prev_hi = hi

    def contains(self, f_hz: np.ndarray) -> np.ndarray:
        mask = np.zeros(len(f_hz), dtype=bool)
        for lo, hi in self.intervals:
            mask |= (f_hz >= lo) & (f_hz < hi)
        return mask


@dataclass
class Spectrogram:
    """2-D magnitude image: frequency rows by time columns."""

    values: np.ndarray
    row_freqs_hz: np.ndarray
    col_times_s: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.row_freqs_hz = np.asarray(self.row_freqs_hz, dtype=np.float64)
        self.col_times_s = np.asarray(self.col_times_s, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"spectrogram values must be 2-D, got shape {self.values.shape}")
        if len(self.row_freqs_hz) != self.values.shape[0]:
            raise ValueError("row_freqs_hz length must match row count")
        if len(self.col_times_s) != self.values.shape[1]:
            raise ValueError("col_times_s length must match column count")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def car_filter(trial: RawTrial) -> RawTrial:
    """Common average reference: subtract the per-sample mean across channels.

    Defined only for multichannel trials; apply before channel selection.
    """
    if trial.n_channels < 2:
        raise ValueError("CAR filter needs at least 2 channels; apply it before channel selection")
    samples = trial.samples.astype(np.float64)
    filtered = samples - samples.mean(axis=0, keepdims=True)
    return RawTrial(
        subject_id=trial.subject_id,
        stimulus_hz=trial.stimulus_hz,
        sample_rate_hz=trial.sample_rate_hz,
        channels=trial.channels,
        samples=filtered,
        trial_index=trial.trial_index,
    )


def window_starts(signal_len: int, cfg: WindowConfig) -> list[int]:
    """Start offsets 0, d, 2d, ... while the window still fits entirely."""
    if cfg.window_len_samples > signal_len:
        raise ValueError(
            f"window of {cfg.window_len_samples} samples does not fit signal of {signal_len}"
        )
    n = (signal_len - cfg.window_len_samples) // cfg.displacement_samples + 1
    return [i * cfg.displacement_samples for i in range(n)]


def slice_windows(
    signal: np.ndarray,
    cfg: WindowConfig,
    *,
    subject_id: int = 0,
    stimulus_hz: float = 0.0,
    trial_index: int = 0,
    sample_rate_hz: float = 250.0,
) -> list[WindowSlice]:
    """Cut a 1-D signal into fixed-length slices at a fixed displacement."""
    signal = np.asarray(signal)
    if signal.ndim != 1:
        raise ValueError(f"slice_windows expects a 1-D signal, got shape {signal.shape}")
    return [
        WindowSlice(
            subject_id=subject_id,
            stimulus_hz=stimulus_hz,
            trial_index=trial_index,
            start_sample=start,
            samples=signal[start:start + cfg.window_len_samples].copy(),
            sample_rate_hz=sample_rate_hz,
        )
        for start in window_starts(len(signal), cfg)
    ]


def slice_trial(trial: RawTrial, cfg: WindowConfig, channel: str | None = None) -> list[WindowSlice]:
    """Slice one channel of a trial, inheriting the trial's provenance."""
    if channel is None:
        if trial.n_channels != 1:
            raise ValueError("trial has multiple channels; name the one to slice")
        channel = trial.channels[0]
    return slice_windows(
        trial.channel(channel),
        cfg,
        subject_id=trial.subject_id,
        stimulus_hz=trial.stimulus_hz,
        trial_index=trial.trial_index,
        sample_rate_hz=trial.sample_rate_hz,
    )


def _frame_window(cfg: StftConfig) -> np.ndarray:
    if cfg.window_fn == "rectangular":
        return np.ones(cfg.fft_window_len)
    if cfg.window_fn == "hann":
        return np.hanning(cfg.fft_window_len)
    return np.blackman(cfg.fft_window_len)


def stft_magnitude(
    window: WindowSlice | np.ndarray,
    cfg: StftConfig = StftConfig(),
    sample_rate_hz: float | None = None,
) -> Spectrogram:
    """Center-padded STFT magnitude of a slice.

    The signal is zero-padded by fft_window_len//2 on each side, so frame i
    is centered on sample i*hop and the frame count is len//hop + 1. Rows
    are rFFT bins 0..fft_window_len//2 at sample_rate/fft_window_len Hz.
    """
    if isinstance(window, WindowSlice):
        x = np.asarray(window.samples, dtype=np.float64)
        fs = window.sample_rate_hz
    else:
        x = np.asarray(window, dtype=np.float64)
        if sample_rate_hz is None:
            raise ValueError("sample_rate_hz is required for a bare array input")
        fs = sample_rate_hz
    if x.ndim != 1 or len(x) < 1:
        raise ValueError(f"expected a non-empty 1-D signal, got shape {x.shape}")

    win = cfg.fft_window_len
    hop = cfg.hop
    n_frames = len(x) // hop + 1
    pad = win // 2
    needed = (n_frames - 1) * hop + win
    padded = np.concatenate([np.zeros(pad), x, np.zeros(max(pad, needed - len(x) - pad))])

    taper = _frame_window(cfg)
    values = np.empty((win // 2 + 1, n_frames), dtype=np.float64)
    for i in range(n_frames):
        frame = padded[i * hop:i * hop + win] * taper
        values[:, i] = np.abs(np.fft.rfft(frame))

    row_freqs = np.arange(win // 2 + 1) * (fs / win)
    col_times = np.arange(n_frames) * (hop / fs)
    return Spectrogram(values=values, row_freqs_hz=row_freqs, col_times_s=col_times)


def band_select(spec: Spectrogram, bands: BandSpec = BandSpec()) -> Spectrogram:
    """Keep only rows whose bin frequency falls in one of the configured bands."""
    mask = bands.contains(spec.row_freqs_hz)
    if not mask.any():
        raise ValueError(f"no spectrogram rows fall inside bands {bands.intervals}")
    return Spectrogram(
        values=spec.values[mask].copy(),
        row_freqs_hz=spec.row_freqs_hz[mask].copy(),
        col_times_s=spec.col_times_s.copy(),
        normalized=spec.normalized,
    )


def db_normalize(spec: Spectrogram, eps: float = DB_FLOOR_EPS) -> Spectrogram:
    """Convert magnitudes to dB and min-max rescale the image to [0, 1].

    Constant images (including all-zero ones) normalize to all zeros.
    """
    db = 20.0 * np.log10(spec.values + eps)
    lo, hi = db.min(), db.max()
    if hi > lo:
        values = (db - lo) / (hi - lo)
    else:
        values = np.zeros_like(db)
    return Spectrogram(
        values=values,
        row_freqs_hz=spec.row_freqs_hz.copy(),
        col_times_s=spec.col_times_s.copy(),
        normalized=True,
    )


def resize_nearest(spec: Spectrogram, out_rows: int = 96, out_cols: int = 64) -> Spectrogram:
    """Nearest-neighbor resize: output[r, c] = input[r*in_rows//out_rows, c*in_cols//out_cols]."""
    in_rows, in_cols = spec.shape
    if in_rows < 1 or in_cols < 1:
        raise ValueError("cannot resize an empty spectrogram")
    row_idx = (np.arange(out_rows) * in_rows) // out_rows
    col_idx = (np.arange(out_cols) * in_cols) // out_cols
    return Spectrogram(
        values=spec.values[np.ix_(row_idx, col_idx)].copy(),
        row_freqs_hz=spec.row_freqs_hz[row_idx].copy(),
        col_times_s=spec.col_times_s[col_idx].copy(),
        normalized=spec.normalized,
    )


def resize_nearest_values(values: np.ndarray, out_rows: int, out_cols: int) -> np.ndarray:
    """Array-level nearest-neighbor resize with the same index rule."""
    in_rows, in_cols = values.shape[-2], values.shape[-1]
    row_idx = (np.arange(out_rows) * in_rows) // out_rows
    col_idx = (np.arange(out_cols) * in_cols) // out_cols
    return values[..., row_idx[:, None], col_idx[None, :]]


def flatten_for_svm(spec: Spectrogram | np.ndarray) -> np.ndarray:
    """Row-major flatten of an 8x3 image into the 24-vector the SVM consumes."""
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
    if values.shape != (8, 3):
        raise ValueError(f"expected an 8x3 image, got shape {values.shape}")
    return values.reshape(24).copy()


def window_to_image(
    window: WindowSlice,
    stft_cfg: StftConfig = StftConfig(),
    bands: BandSpec = BandSpec(),
) -> Spectrogram:
    """Full per-window image chain: STFT -> band selection -> dB + min-max."""
    return db_normalize(band_select(stft_magnitude(window, stft_cfg), bands), stft_cfg.db_floor_eps)


def write_pgm(spec: Spectrogram | np.ndarray, path: str | Path) -> None:
    """Export a normalized image as a binary PGM, values scaled by 255."""
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
    gray = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    rows, cols = gray.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + gray.tobytes())

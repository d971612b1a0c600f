"""Log-mel spectrogram computation and the acoustic-activity detector score."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ConfigurationError
from .ingest import WindowedClip

SPEC_SIZE = 100  # output spectrogram is SPEC_SIZE x SPEC_SIZE


@dataclass(frozen=True)
class StftConfig:
    taper_len: int = 1024
    hop: int = 256  # 25% of the taper

    def __post_init__(self):
        if not (0 < self.hop <= self.taper_len):
            raise ValueError(f"need 0 < hop <= taper_len, got {self.hop}, {self.taper_len}")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = SPEC_SIZE
    f_min: float = 0.0
    f_max: float = 10000.0  # most of the signal of interest sits below 10 kHz
    log_eps: float = 0.001

    def __post_init__(self):
        if not (0 <= self.f_min < self.f_max):
            raise ValueError(f"need 0 <= f_min < f_max, got {self.f_min}, {self.f_max}")
        if self.log_eps <= 0:
            raise ValueError("log_eps must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    field_min_score: float = 0.1  # field windows keep score >= this
    reference_min_score: float = 0.3  # reference windows keep score > this
    row_factor: float = 1.5


@dataclass(frozen=True)
class MelSpectrogram:
    """100x100 normalized log-mel image; rows are mel bins low->high, columns time."""

    values: np.ndarray
    window_id: str = ""

    def __post_init__(self):
        if self.values.shape != (SPEC_SIZE, SPEC_SIZE):
            raise ValueError(f"expected {SPEC_SIZE}x{SPEC_SIZE}, got {self.values.shape}")


def hann(n: int) -> np.ndarray:
    """Periodic Hann taper w[k] = 0.5 * (1 - cos(2 pi k / n))."""
    if n < 1:
        raise ValueError("taper length must be >= 1")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def stft_magnitude(samples: np.ndarray, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Magnitude STFT, shape (frames, taper_len // 2 + 1)."""
    n = len(samples)
    if n < cfg.taper_len:
        raise ValueError(f"window of {n} samples is shorter than taper {cfg.taper_len}")
    frames = np.lib.stride_tricks.sliding_window_view(samples, cfg.taper_len)[:: cfg.hop]
    return np.abs(np.fft.rfft(frames * hann(cfg.taper_len), axis=1))


def mel_of(f):
    """Mel scale: 2595 * log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    cfg: MelConfig, taper_len: int, sample_rate: int
) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, taper_len // 2 + 1)."""
    if cfg.f_max > sample_rate / 2:
        raise ConfigurationError(
            f"f_max {cfg.f_max} exceeds Nyquist {sample_rate / 2}"
        )
    n_bins = taper_len // 2 + 1
    fft_freqs = np.arange(n_bins) * sample_rate / taper_len
    mel_pts = np.linspace(mel_of(cfg.f_min), mel_of(cfg.f_max), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        lo, ctr, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (fft_freqs - lo) / (ctr - lo)
        down = (hi - fft_freqs) / (hi - ctr)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
        if not fb[i].any():
            raise ConfigurationError(
                f"mel filter {i} is empty: n_mels={cfg.n_mels} too large for "
                f"taper_len={taper_len} at {sample_rate} Hz"
            )
    return fb


def _resize_time_axis(m: np.ndarray, n_cols: int) -> np.ndarray:
    """Linear interpolation of each row onto n_cols equally spaced columns."""
    src = m.shape[1]
    if src == n_cols:
        return m
    x_new = np.linspace(0.0, src - 1.0, n_cols)
    x_old = np.arange(src)
    out = np.empty((m.shape[0], n_cols))
    for r in range(m.shape[0]):
        out[r] = np.interp(x_new, x_old, m[r])
    return out


def log_mel(
    win: WindowedClip,
    sample_rate: int,
    stft: StftConfig = StftConfig(),
    mel: MelConfig = MelConfig(),
    filterbank: np.ndarray | None = None,
) -> MelSpectrogram:
    """Full pipeline: STFT -> mel projection -> max-normalize -> log10(v + eps)
    -> min-max rescale to [0, 1] -> resize time axis to 100 columns.

    An all-zero window maps to an all-zero spectrogram.
    """
    if filterbank is None:
        filterbank = mel_filterbank(mel, stft.taper_len, sample_rate)
    mags = stft_magnitude(win.samples, stft)  # (frames, bins)
    m = filterbank @ mags.T  # (n_mels, frames)

    peak = m.max()
    if peak > 0:
        m = m / peak
    m = np.log10(m + mel.log_eps)
    lo, hi = m.min(), m.max()
    if hi > lo:
        m = (m - lo) / (hi - lo)
    else:
        m = np.zeros_like(m)
    m = _resize_time_axis(m, SPEC_SIZE)
    # interpolation can pull the peak below 1; renormalize so max is exactly 1
    lo, hi = m.min(), m.max()
    if hi > lo:
        m = (m - lo) / (hi - lo)
    return MelSpectrogram(m, window_id=win.window_id)


def detector_score(values: np.ndarray, row_factor: float = 1.5) -> float:
    """Fraction of pixels strictly above their column median and strictly above
    row_factor times their row median.

    The image is shifted so its minimum is 0 before comparing; pipeline
    spectrograms already satisfy this, and it makes the score exactly
    invariant to adding a constant to every pixel.
    """
    values = values - values.min()
    col_med = np.median(values, axis=0)
    row_med = np.median(values, axis=1)
    mask = (values > col_med[None, :]) & (values > row_factor * row_med[:, None])
    return float(mask.sum()) / values.size


def filter_windows(
    scored: list[tuple[str, float]], role: str, cfg: DetectorConfig = DetectorConfig()
) -> list[str]:
    """Keep field windows scoring >= 0.1 and reference windows scoring > 0.3."""
    if role == "field":
        return [wid for wid, s in scored if s >= cfg.field_min_score]
    if role == "reference":
        return [wid for wid, s in scored if s > cfg.reference_min_score]
    raise ValueError(f"unknown corpus role {role!r}")


def render_png(spec: MelSpectrogram) -> bytes:
    """8-bit grayscale PNG, 1.0 -> 255, mel bin 0 at the bottom row."""
    img = np.clip(np.round(spec.values * 255.0), 0, 255).astype(np.uint8)
    img = img[::-1]  # low frequencies at the bottom
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Inverse of render_png up to 8-bit quantization (values in [0, 1])."""
    img = np.asarray(Image.open(io.BytesIO(data)), dtype=np.float64) / 255.0
    return img[::-1]

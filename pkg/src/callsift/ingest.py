"""Audio decoding, resampling, and slicing recordings into overlapping windows."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import DecodeError, UnsupportedFormatError

# Analysis runs at a fixed rate: the band of interest tops out at 10 kHz,
# so 32 kHz leaves Nyquist margin while keeping FFT cost low.
PIPELINE_SAMPLE_RATE = 32000


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    recording_id: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class WindowConfig:
    window_len_s: float = 1.0
    hop_s: float = 0.5

    def __post_init__(self):
        if not (0 < self.hop_s <= self.window_len_s):
            raise ValueError(
                f"need 0 < hop_s <= window_len_s, got hop={self.hop_s}, len={self.window_len_s}"
            )


@dataclass(frozen=True)
class WindowedClip:
    window_id: str
    recording_id: str
    start_s: float
    samples: np.ndarray
    corpus_role: str = "reference"  # "reference" | "field"
    padded: bool = False


def decode_wav(data: bytes, recording_id: str = "") -> AudioClip:
    """Decode a RIFF/WAVE payload (PCM16 or IEEE float, 1-2 channels) to a mono clip.

    16-bit samples are scaled by 1/32768; stereo is averaged down to mono.
    """
    try:
        rate, samples = wavfile.read(io.BytesIO(data))
    except Exception as exc:
        raise DecodeError(f"cannot parse WAV data: {exc}") from exc

    if samples.dtype == np.int16:
        x = samples.astype(np.float64) / 32768.0
    elif samples.dtype in (np.float32, np.float64):
        x = samples.astype(np.float64)
    else:
        raise UnsupportedFormatError(
            f"unsupported sample format {samples.dtype}; expected PCM16 or IEEE float"
        )

    if x.ndim == 2:
        if x.shape[1] > 2:
            raise UnsupportedFormatError(f"{x.shape[1]} channels; expected 1 or 2")
        x = x.mean(axis=1)
    return AudioClip(samples=x, sample_rate=int(rate), recording_id=recording_id)


def encode_wav(clip: AudioClip) -> bytes:
    """Serialize a clip as mono PCM16 WAV (the /media/audio wire format)."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, clip.sample_rate, pcm)
    return buf.getvalue()


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling; preserves duration to within one sample period."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples, clip.sample_rate, clip.recording_id)
    n = len(clip.samples)
    if n == 0:
        return AudioClip(np.empty(0), target_rate, clip.recording_id)
    duration = n / clip.sample_rate
    m = int(round(duration * target_rate))
    t_out = np.arange(m) / target_rate
    t_in = np.arange(n) / clip.sample_rate
    y = np.interp(t_out, t_in, clip.samples)
    return AudioClip(y, target_rate, clip.recording_id)


def window(
    clip: AudioClip, cfg: WindowConfig = WindowConfig(), corpus_role: str = "reference"
) -> list[WindowedClip]:
    """Cut a recording into overlapping fixed-length windows.

    Windows start at 0, hop, 2*hop, ... and are emitted only when they fit
    entirely inside the recording; for duration D >= W the count is
    floor((D - W) / H) + 1. Recordings shorter than one window yield a single
    zero-padded window flagged ``padded``.
    """
    if len(clip.samples) == 0:
        raise ValueError("cannot window an empty clip")
    win_n = int(round(cfg.window_len_s * clip.sample_rate))
    hop_n = int(round(cfg.hop_s * clip.sample_rate))
    n = len(clip.samples)

    def make(idx: int, start_n: int, samples: np.ndarray, padded: bool) -> WindowedClip:
        start_s = start_n / clip.sample_rate
        wid = f"{clip.recording_id}#{idx:04d}"
        return WindowedClip(wid, clip.recording_id, start_s, samples, corpus_role, padded)

    if n < win_n:
        padded = np.zeros(win_n)
        padded[:n] = clip.samples
        return [make(0, 0, padded, True)]

    out = []
    idx = 0
    start = 0
    while start + win_n <= n:
        out.append(make(idx, start, clip.samples[start : start + win_n].copy(), False))
        idx += 1
        start += hop_n
    return out

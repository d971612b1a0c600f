"""Seeded synthetic corpora: tonal 'calls' vs broadband noise, with ground truth.

Keeps the repo data-free: every test and demo that needs audio generates it
here, deterministically per seed.

Corpus calls are two-note bursts: stacks of tones filling a mel band around a
low note, then a high note. Thin single chirps never reach the detector's
reference threshold (too few spectrogram pixels), while a two-note band burst
keeps every row and column of the image lit less than half the time, which is
exactly what the median-based detector score rewards.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .dsp import mel_to_hz
from .ingest import PIPELINE_SAMPLE_RATE, AudioClip, WindowConfig, encode_wav, window


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_reference: int = 12
    n_positive: int = 30
    n_negative: int = 30
    recording_len_s: float = 3.0
    f0: float = 1500.0  # lower note center (Hz)
    f1: float = 5200.0  # upper note center (Hz)
    call_dur_s: float = 0.9
    noise_kind: str = "white"  # "white" | "pink"
    snr_db: float = 10.0
    sample_rate: int = PIPELINE_SAMPLE_RATE


def gen_call(
    seed: int, f0: float, f1: float, dur_s: float, sr: int = PIPELINE_SAMPLE_RATE
) -> AudioClip:
    """Linear chirp from f0 to f1 with a Hann amplitude envelope."""
    if f0 >= sr / 2 or f1 >= sr / 2:
        raise ValueError(f"chirp frequencies {f0}/{f1} at or above Nyquist {sr / 2}")
    n = int(round(dur_s * sr))
    t = np.arange(n) / sr
    phase = 2.0 * np.pi * (f0 * t + 0.5 * (f1 - f0) / dur_s * t**2)
    env = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))
    rng = np.random.default_rng(seed)
    x = env * np.sin(phase + rng.uniform(0, 2 * np.pi))
    return AudioClip(x, sr, recording_id=f"call-{seed}")


def _band_burst(rng, mel_center, half_mel, n_tones, dur_s, sr):
    n = int(round(dur_s * sr))
    x = np.zeros(n)
    t = np.arange(n) / sr
    for off in np.linspace(-half_mel, half_mel, n_tones):
        f = mel_to_hz(mel_center + off)
        x += np.sin(2.0 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return x * 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def gen_two_note_call(
    seed: int,
    f_low: float,
    f_high: float,
    dur_s: float,
    sr: int = PIPELINE_SAMPLE_RATE,
    half_mel: float = 600.0,
    n_tones: int = 30,
) -> AudioClip:
    """Low band burst then high band burst, tone stacks spanning a mel band."""
    rng = np.random.default_rng(seed)
    note_dur = dur_s * 7.0 / 15.0
    gap = dur_s * 1.0 / 15.0
    b1 = _band_burst(rng, dsp.mel_of(f_low), half_mel, n_tones, note_dur, sr)
    b2 = _band_burst(rng, dsp.mel_of(f_high), half_mel, n_tones, note_dur, sr)
    j = int(round((note_dur + gap) * sr))
    x = np.zeros(j + len(b2))
    x[: len(b1)] += b1
    x[j:] += b2
    x /= np.abs(x).max()
    return AudioClip(x, sr, recording_id=f"call-{seed}")


def _noise(rng, n, kind):
    x = rng.standard_normal(n)
    if kind == "pink":
        spec = np.fft.rfft(x)
        freqs = np.maximum(np.fft.rfftfreq(n), 1.0 / n)
        x = np.fft.irfft(spec / np.sqrt(freqs), n)
    return x / max(np.abs(x).max(), 1e-12)


def _mix(call_events, noise, sr, snr_db):
    """Sum call events into the noise bed at the requested SNR."""
    sig = np.zeros_like(noise)
    for start_s, call in call_events:
        i = int(round(start_s * sr))
        seg = call.samples[: len(sig) - i]
        sig[i : i + len(seg)] += seg
    sig_pow = np.mean(sig**2)
    noise_pow = np.mean(noise**2)
    if sig_pow > 0 and noise_pow > 0:
        gain = np.sqrt(sig_pow / (noise_pow * 10.0 ** (snr_db / 10.0)))
        mixed = sig + gain * noise
    else:
        mixed = sig + noise
    peak = np.abs(mixed).max()
    return mixed / peak if peak > 1.0 else mixed


def _detector_pass_count(clip: AudioClip, threshold: float, fb) -> int:
    count = 0
    for w in window(clip, WindowConfig(), corpus_role="field"):
        spec = dsp.log_mel(w, clip.sample_rate, filterbank=fb)
        if dsp.detector_score(spec.values) >= threshold:
            count += 1
    return count


def gen_corpus(
    spec: SynthSpec, root: str | Path
) -> tuple[list[Path], list[Path], Path]:
    """Write reference WAVs (clean calls), field WAVs (mixed), and a truth CSV.

    Positive field recordings carry two call events over noise at spec.snr_db;
    negatives are noise only. Call starts snap to the 0.5 s window grid so a
    window always contains a full call; positives are re-rolled until at least
    two windows pass the field detector threshold.
    """
    root = Path(root)
    ref_dir = root / "corpus" / "reference"
    field_dir = root / "corpus" / "field"
    ref_dir.mkdir(parents=True, exist_ok=True)
    field_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    sr = spec.sample_rate
    rec_n = int(round(spec.recording_len_s * sr))
    fb = dsp.mel_filterbank(dsp.MelConfig(), dsp.StftConfig().taper_len, sr)

    def random_call(call_rng):
        f_low = spec.f0 * call_rng.uniform(0.92, 1.08)
        f_high = spec.f1 * call_rng.uniform(0.92, 1.08)
        return gen_two_note_call(
            int(call_rng.integers(2**32)), f_low, f_high, spec.call_dur_s, sr
        )

    def call_starts(call_rng):
        # one call per half of the recording, starts on the 0.5 s grid
        half = spec.recording_len_s / 2
        grid = np.arange(0.0, half - spec.call_dur_s + 1e-9, 0.5)
        s1 = call_rng.choice(grid)
        grid2 = np.arange(half, spec.recording_len_s - spec.call_dur_s + 1e-9, 0.5)
        s2 = call_rng.choice(grid2)
        return s1, s2

    ref_paths = []
    for i in range(spec.n_reference):
        x = np.zeros(rec_n)
        for start in call_starts(rng):
            call = random_call(rng)
            j = int(round(start * sr))
            x[j : j + len(call.samples)] += call.samples
        rid = f"ref{i:03d}"
        p = ref_dir / f"{rid}.wav"
        p.write_bytes(encode_wav(AudioClip(x, sr, rid)))
        ref_paths.append(p)

    field_paths = []
    truth: dict[str, bool] = {}
    for i in range(spec.n_positive + spec.n_negative):
        positive = i < spec.n_positive
        rid = f"field{i:03d}"
        if positive:
            for attempt in range(50):
                sub = np.random.default_rng((spec.seed, i, attempt))
                noise = _noise(sub, rec_n, spec.noise_kind)
                events = [(s, random_call(sub)) for s in call_starts(sub)]
                x = _mix(events, noise, sr, spec.snr_db)
                clip = AudioClip(x, sr, rid)
                if _detector_pass_count(clip, dsp.DetectorConfig().field_min_score, fb) >= 2:
                    break
            else:
                raise RuntimeError(f"could not place detectable calls in {rid}")
        else:
            sub = np.random.default_rng((spec.seed, i, 10_000))
            x = 0.3 * _noise(sub, rec_n, spec.noise_kind)
            clip = AudioClip(x, sr, rid)
        p = field_dir / f"{rid}.wav"
        p.write_bytes(encode_wav(clip))
        field_paths.append(p)
        truth[rid] = positive

    truth_path = root / "truth.csv"
    with open(truth_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["recording_id", "true_positive"])
        for rid, pos in truth.items():
            writer.writerow([rid, int(pos)])
    return ref_paths, field_paths, truth_path


def load_truth(path: str | Path) -> dict[str, bool]:
    truth = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            truth[row["recording_id"]] = bool(int(row["true_positive"]))
    return truth

"""Distant-speech contamination: clean speech convolved with room IRs plus noise.

Per output channel: y = conv(x, h_channel), optionally mixed with a shared
background-noise realization scaled to a target SNR.  All randomness (the
noise start offset) is driven by an explicit seed so jobs are reproducible
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import AudioSignal, ImpulseResponse, ValidationError
from .engine import fft_convolve

NOISE_CROSSFADE = 0.010  # seconds of crossfade at noise wrap seams
CLIP_RUN_LENGTH = 3
CLIP_THRESHOLD = 0.999
PEAK_NORM_DBFS = -1.0


def convolve(x: AudioSignal, h: ImpulseResponse) -> AudioSignal:
    """Full linear convolution of a mono signal with an impulse response."""
    if x.sample_rate != h.sample_rate:
        raise ValidationError(
            f"sample-rate mismatch: signal {x.sample_rate} Hz vs IR {h.sample_rate} Hz"
        )
    return AudioSignal(x.sample_rate, fft_convolve(x.mono, h.samples))


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x**2)))


def _tile_noise(noise: np.ndarray, length: int, offset: int, fade: int) -> np.ndarray:
    """Noise cropped/tiled to ``length`` starting at ``offset``, with crossfaded wraps."""
    n = noise.size
    offset = offset % n
    rolled = np.roll(noise, -offset)
    if length <= n:
        return rolled[:length].copy()
    fade = min(fade, n // 2)
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
        body = rolled.copy()
        body[:fade] = ramp * body[:fade] + (1.0 - ramp) * rolled[n - fade :]
        hop = n - fade
    else:
        body = rolled
        hop = n
    reps = int(np.ceil((length - n) / hop)) + 1
    out = np.empty(n + (reps - 1) * hop)
    out[:n] = rolled
    pos = n - fade if fade > 0 else n
    for _ in range(reps - 1):
        out[pos : pos + n] = body if fade > 0 else rolled
        pos += hop
    return out[:length]


def noise_gain(signal_rms: float, noise_rms: float, target_snr_db: float) -> float:
    """Scale factor g so that rms(signal) / rms(g * noise) hits the target SNR."""
    return signal_rms / (noise_rms * 10.0 ** (target_snr_db / 20.0))


def mix_noise(
    y: AudioSignal,
    noise: AudioSignal,
    target_snr_db: float,
    seed: int,
) -> AudioSignal:
    """Add background noise to ``y`` at the requested SNR (full-signal rms ratio)."""
    if y.sample_rate != noise.sample_rate:
        raise ValidationError("sample-rate mismatch between signal and noise")
    sig = y.mono
    if _rms(sig) == 0.0:
        raise ValidationError("cannot set an SNR against a silent signal")
    src = noise.mono
    if _rms(src) == 0.0:
        raise ValidationError("noise signal is silent")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, src.size))
    fade = int(round(NOISE_CROSSFADE * y.sample_rate))
    n = _tile_noise(src, sig.size, offset, fade)
    g = noise_gain(_rms(sig), _rms(n), target_snr_db)
    return AudioSignal(y.sample_rate, sig + g * n)


@dataclass
class CleanReport:
    """Quality report for a close-talking recording."""

    snr_db: Optional[float]
    clipping: bool
    dc_offset: float
    passed: bool


def validate_clean(x: AudioSignal, min_snr_db: float = 50.0) -> CleanReport:
    """Estimate recording quality: SNR, clipping and DC offset.

    SNR is the ratio of active-frame energy (frames 20 dB above the floor)
    to the lowest-decile frame energy, on 25 ms frames with 10 ms hop.
    """
    sig = x.mono
    clipped = _has_clipping(sig)
    dc = float(np.mean(sig)) if sig.size else 0.0
    if sig.size == 0 or _rms(sig) == 0.0:
        return CleanReport(snr_db=None, clipping=clipped, dc_offset=dc, passed=False)

    frame = max(int(round(0.025 * x.sample_rate)), 1)
    hop = max(int(round(0.010 * x.sample_rate)), 1)
    n_frames = max((sig.size - frame) // hop + 1, 1)
    energies = np.array(
        [np.mean(sig[i * hop : i * hop + frame] ** 2) for i in range(n_frames)]
    )
    energies = energies[energies > 0]
    if energies.size == 0:
        return CleanReport(snr_db=None, clipping=clipped, dc_offset=dc, passed=False)

    floor_count = max(int(np.ceil(energies.size * 0.1)), 1)
    floor = float(np.mean(np.sort(energies)[:floor_count]))
    active = energies[energies >= floor * 100.0]  # 20 dB above the floor
    if active.size == 0 or floor == 0.0:
        snr = None
    else:
        snr = float(10.0 * np.log10(np.mean(active) / floor))
    passed = snr is not None and snr >= min_snr_db and not clipped
    return CleanReport(snr_db=snr, clipping=clipped, dc_offset=dc, passed=passed)


def _has_clipping(sig: np.ndarray) -> bool:
    hot = np.abs(sig) >= CLIP_THRESHOLD
    if hot.size < CLIP_RUN_LENGTH:
        return False
    run = np.ones(CLIP_RUN_LENGTH, dtype=bool)
    windows = np.lib.stride_tricks.sliding_window_view(hot, CLIP_RUN_LENGTH)
    return bool(np.any(np.all(windows == run, axis=1)))


@dataclass
class ContaminationJob:
    """One contamination unit: clean signal, per-channel IRs, optional noise."""

    clean: AudioSignal
    irs: List[ImpulseResponse]
    noise: Optional[AudioSignal] = None
    target_snr_db: Optional[float] = None
    seed: int = 0
    normalization: str = "none"  # "none" | "peak"
    per_channel_noise: bool = False

    def __post_init__(self):
        if not self.irs:
            raise ValidationError("job needs at least one impulse response")
        for h in self.irs:
            if h.sample_rate != self.clean.sample_rate:
                raise ValidationError("all IRs must share the clean signal's sample rate")
        if self.target_snr_db is not None and self.noise is None:
            raise ValidationError("target_snr_db requires a noise signal")
        if self.noise is not None and self.target_snr_db is None:
            raise ValidationError("noise requires a target_snr_db")
        if self.normalization not in ("none", "peak"):
            raise ValidationError(f"unknown normalization {self.normalization!r}")


def run_job(job: ContaminationJob) -> AudioSignal:
    """Execute a contamination job, returning one channel per IR.

    Channels share a single noise realization offset (one room noise source)
    unless ``per_channel_noise`` is set.  Peak normalization scales all
    channels jointly so inter-channel level ratios survive.
    """
    fs = job.clean.sample_rate
    x = job.clean.mono
    n_out = x.size + max(h.num_samples for h in job.irs) - 1
    channels = np.zeros((len(job.irs), n_out))
    for i, h in enumerate(job.irs):
        y = fft_convolve(x, h.samples)
        channels[i, : y.size] = y

    if job.noise is not None:
        src = job.noise.mono
        if _rms(src) == 0.0:
            raise ValidationError("noise signal is silent")
        fade = int(round(NOISE_CROSSFADE * fs))
        rng = np.random.default_rng(job.seed)
        offset = int(rng.integers(0, src.size))
        for i in range(channels.shape[0]):
            if job.per_channel_noise and i > 0:
                offset = int(rng.integers(0, src.size))
            n = _tile_noise(src, n_out, offset, fade)
            sig_rms = _rms(channels[i])
            if sig_rms == 0.0:
                raise ValidationError(f"channel {i} is silent, cannot set SNR")
            channels[i] += noise_gain(sig_rms, _rms(n), job.target_snr_db) * n

    if job.normalization == "peak":
        peak = float(np.max(np.abs(channels)))
        if peak > 0:
            channels *= 10.0 ** (PEAK_NORM_DBFS / 20.0) / peak

    return AudioSignal(fs, channels)

"""Exponential sine sweep generation, inversion and IR deconvolution.

The sweep is x(t) = A * sin(K * (exp(t / L) - 1)) with L = T / ln(f2 / f1)
and K = 2 * pi * f1 * L, so the instantaneous frequency rises exponentially
from f1 to f2 over the duration T.  The inverse filter is the time-reversed
sweep with an exp(-t / L) amplitude envelope (+6 dB/octave compensation);
convolving sweep and inverse yields a band-limited delta, and loudspeaker
harmonic distortion folds to negative lag where it can be discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AudioSignal, ImpulseResponse, ValidationError
from .engine import fft_convolve

DEFAULT_PRE_PEAK_GUARD = 0.005  # seconds retained before the direct-path peak
PEAK_OVER_MEDIAN_DB = 20.0  # minimum peak prominence for "sweep found"


@dataclass(frozen=True)
class SweepSpec:
    """Exponential sweep parameters: band, duration, level and fade tapers."""

    f_start: float
    f_end: float
    duration: float
    amplitude: float = 0.9
    fade: float = 0.0

    def __post_init__(self):
        if not (0 < self.f_start < self.f_end):
            raise ValidationError(f"need 0 < f_start < f_end, got {self.f_start}, {self.f_end}")
        if self.duration <= 0:
            raise ValidationError("sweep duration must be positive")
        if not (0 < self.amplitude <= 1):
            raise ValidationError("amplitude must lie in (0, 1]")
        if self.fade < 0 or 2 * self.fade > self.duration:
            raise ValidationError("fade must be >= 0 and fit twice into the duration")

    def validate_rate(self, sample_rate: int) -> None:
        if self.f_end >= sample_rate / 2:
            raise ValidationError(
                f"f_end {self.f_end} Hz reaches Nyquist for sample rate {sample_rate}"
            )

    @property
    def rate_constant(self) -> float:
        """L = T / ln(f2 / f1), the exponential time constant of the sweep."""
        return self.duration / math.log(self.f_end / self.f_start)


def generate_ess(spec: SweepSpec, sample_rate: int) -> AudioSignal:
    """Generate the exponential sine sweep for ``spec``."""
    spec.validate_rate(sample_rate)
    n = int(round(spec.duration * sample_rate))
    t = np.arange(n) / sample_rate
    L = spec.rate_constant
    k = 2.0 * np.pi * spec.f_start * L
    x = spec.amplitude * np.sin(k * (np.exp(t / L) - 1.0))
    if spec.fade > 0:
        nf = int(round(spec.fade * sample_rate))
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(nf) / nf))
        x[:nf] *= ramp
        x[-nf:] *= ramp[::-1]
    return AudioSignal(sample_rate, x)


def inverse_filter(spec: SweepSpec, sample_rate: int) -> AudioSignal:
    """Inverse filter: time-reversed sweep with +6 dB/octave compensation.

    Normalized so that sweep * inverse has unit peak.
    """
    sweep = generate_ess(spec, sample_rate).mono
    n = sweep.size
    t = np.arange(n) / sample_rate
    env = np.exp(-t / spec.rate_constant)
    inv = sweep[::-1] * env
    peak = float(np.max(np.abs(fft_convolve(sweep, inv))))
    return AudioSignal(sample_rate, inv / peak)


def _peak_prominence_db(raw: np.ndarray, fs: int, block_seconds: float = 0.1) -> float:
    """Peak-to-floor statistic robust to the inverse filter's envelope.

    The deconvolution of non-sweep input is strongly nonstationary (the
    inverse filter carries an exponential envelope), so a global median
    underestimates the local noise floor.  Each block is equalized to unit
    rms first; a genuine IR then stands out as a sharp local peak.
    """
    block = max(int(round(block_seconds * fs)), 1)
    n_blocks = int(np.ceil(raw.size / block))
    equalized = np.empty(raw.size)
    for i in range(n_blocks):
        seg = raw[i * block : (i + 1) * block]
        rms = np.sqrt(np.mean(seg**2))
        equalized[i * block : i * block + seg.size] = seg / rms if rms > 0 else 0.0
    mags = np.abs(equalized)
    floor = float(np.median(mags))
    if floor == 0.0:
        return np.inf
    return float(20.0 * np.log10(np.max(mags) / floor))


def deconvolve_ir(
    recording: AudioSignal,
    spec: SweepSpec,
    ir_length: float,
    pre_peak_guard: float = DEFAULT_PRE_PEAK_GUARD,
) -> ImpulseResponse:
    """Recover the impulse response from a recorded sweep playback.

    Convolves the recording with the inverse filter, locates the direct-path
    peak, and keeps the causal segment (plus a short pre-peak guard) out to
    ``ir_length`` seconds.  Distortion products land at negative lag and are
    dropped.  The result is peak-normalized; the scale is stored in ``meta``.
    """
    fs = recording.sample_rate
    spec.validate_rate(fs)
    sweep_len = int(round(spec.duration * fs))
    if recording.num_samples < sweep_len:
        raise ValidationError("recording shorter than the excitation sweep")

    inv = inverse_filter(spec, fs).mono
    raw = fft_convolve(recording.mono, inv)

    peak_idx = int(np.argmax(np.abs(raw)))
    peak = float(np.abs(raw[peak_idx]))
    if peak == 0.0:
        raise ValidationError("sweep not found: silent deconvolution result")
    if _peak_prominence_db(raw, fs) < PEAK_OVER_MEDIAN_DB:
        raise ValidationError("sweep not found: no peak above the noise floor")

    guard = int(round(pre_peak_guard * fs))
    start = max(peak_idx - guard, 0)
    n_out = int(round(ir_length * fs))
    segment = raw[start : start + n_out]
    if segment.size < n_out:
        segment = np.pad(segment, (0, n_out - segment.size))

    scale = 1.0 / peak
    ir = ImpulseResponse(
        fs,
        segment * scale,
        provenance="measured",
        meta={
            "normalization_scale": scale,
            "pre_peak_guard": pre_peak_guard,
            "sweep": {
                "f_start": spec.f_start,
                "f_end": spec.f_end,
                "duration": spec.duration,
                "amplitude": spec.amplitude,
                "fade": spec.fade,
            },
        },
    )
    ir.direct_path_index = peak_idx - start
    return ir

"""Shoebox room impulse response synthesis via the image-source method.

Mirror images of the source are enumerated on the lattice

    x_img = 2 * n * Lx + (1 - 2p) * x_src      (p in {0, 1}, n integer)

per axis; an image built from (n, p) has hit the wall at x=0 |n - p| times
and the wall at x=Lx |n| times.  Each image contributes a tap of amplitude

    gain * prod(beta_wall ** hits) / (4 * pi * distance)

at delay distance / c, where ``gain`` is the source directivity evaluated
with the image's mirrored orientation (boresight components are negated
along every axis with odd mirror parity, i.e. p = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.signal import butter, sosfilt

from .core import (
    Directivity,
    ImpulseResponse,
    MicSpec,
    RoomSpec,
    SourceSpec,
    ValidationError,
    directivity_gain,
)

DEFAULT_IMAGE_BUDGET = 10_000_000
SINC_HALF_WIDTH = 32  # taps on each side in fractional-delay mode


class ResourceError(RuntimeError):
    """Raised when a synthesis request exceeds the configured image budget."""


@dataclass(frozen=True)
class ImageSynthesisConfig:
    """Knobs for the image-source synthesis.

    ``max_reflection_order`` is an integer or "auto" (enough orders that the
    furthest image's delay exceeds ``ir_length``).  ``fractional_delay`` is
    "nearest" (taps rounded to sample instants) or "sinc" (Hann-windowed
    sinc interpolation).  ``highpass_hz`` > 0 applies a Butterworth
    high-pass after synthesis.  ``negative_reflection`` flips the tap sign
    once per reflection (pressure convention).
    """

    ir_length: float = 0.5
    max_reflection_order: Union[int, str] = "auto"
    fractional_delay: str = "nearest"
    highpass_hz: float = 0.0
    negative_reflection: bool = False
    image_budget: int = DEFAULT_IMAGE_BUDGET

    def __post_init__(self):
        if self.ir_length <= 0:
            raise ValidationError(f"ir_length must be positive, got {self.ir_length}")
        if isinstance(self.max_reflection_order, str):
            if self.max_reflection_order != "auto":
                raise ValidationError(f"max_reflection_order must be an integer or 'auto'")
        elif self.max_reflection_order < 0:
            raise ValidationError("max_reflection_order must be >= 0")
        if self.fractional_delay not in ("nearest", "sinc"):
            raise ValidationError(f"unknown fractional_delay mode {self.fractional_delay!r}")
        if self.highpass_hz < 0:
            raise ValidationError("highpass_hz must be >= 0")


def reflectivity_from_t60(room: RoomSpec, t60: float) -> float:
    """Uniform wall reflection coefficient achieving the requested T60 (Eyring).

    alpha = 1 - exp(-0.161 * V / (S * t60)), beta = sqrt(1 - alpha).
    """
    if t60 <= 0:
        raise ValidationError(f"t60 must be positive, got {t60}")
    alpha = 1.0 - math.exp(-0.161 * room.volume / (room.surface_area * t60))
    if alpha >= 1.0:
        raise ValidationError(f"room cannot achieve requested T60 of {t60} s")
    return math.sqrt(1.0 - alpha)


def _resolve_reflectivity(room: RoomSpec) -> np.ndarray:
    if room.reflectivity is not None:
        return np.asarray(room.reflectivity, dtype=float)
    beta = reflectivity_from_t60(room, room.target_t60)
    return np.full(6, beta)


def _axis_images(src: float, length: float, n_max: int):
    """Per-axis image coordinates, wall-hit counts and mirror signs."""
    n = np.arange(-n_max, n_max + 1)
    coords = []
    hits0 = []
    hits1 = []
    signs = []
    for p in (0, 1):
        coords.append(2.0 * n * length + (1 - 2 * p) * src)
        hits0.append(np.abs(n - p))
        hits1.append(np.abs(n))
        signs.append(np.full(n.shape, 1 - 2 * p))
    return (
        np.concatenate(coords),
        np.concatenate(hits0),
        np.concatenate(hits1),
        np.concatenate(signs),
    )


def synthesize_rir(
    room: RoomSpec,
    source: SourceSpec,
    mic: MicSpec,
    config: ImageSynthesisConfig,
    sample_rate: int = 48000,
) -> ImpulseResponse:
    """Synthesize the impulse response between ``source`` and ``mic``."""
    source.validate_in_room(room)
    mic.validate_in_room(room)
    if tuple(source.position) == tuple(mic.position):
        raise ValidationError("source and mic positions coincide")

    c = room.speed_of_sound
    betas = _resolve_reflectivity(room)
    n_out = int(round(config.ir_length * sample_rate))
    if n_out < 1:
        raise ValidationError("ir_length shorter than one sample")

    if config.max_reflection_order == "auto":
        max_dist = c * config.ir_length
        n_maxes = [int(math.ceil(max_dist / (2.0 * L))) + 1 for L in room.dimensions]
        order_cap = None
    else:
        order = int(config.max_reflection_order)
        n_maxes = [order // 2 + 1] * 3
        order_cap = order

    total = 1
    for n_max in n_maxes:
        total *= 2 * (2 * n_max + 1)
    if total > config.image_budget:
        raise ResourceError(
            f"image enumeration needs {total} images, exceeding the budget of {config.image_budget}"
        )

    per_axis = [
        _axis_images(source.position[d], room.dimensions[d], n_maxes[d]) for d in range(3)
    ]
    mic_pos = np.asarray(mic.position)

    # broadcast shapes: axis 0 -> x images, 1 -> y, 2 -> z
    def bc(arr, axis):
        shape = [1, 1, 1]
        shape[axis] = arr.size
        return arr.reshape(shape)

    dx = mic_pos[0] - bc(per_axis[0][0], 0)
    dy = mic_pos[1] - bc(per_axis[1][0], 1)
    dz = mic_pos[2] - bc(per_axis[2][0], 2)
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)

    # per-axis wall attenuation, combined by broadcasting
    att = (
        bc(betas[0] ** per_axis[0][1] * betas[1] ** per_axis[0][2], 0)
        * bc(betas[2] ** per_axis[1][1] * betas[3] ** per_axis[1][2], 1)
        * bc(betas[4] ** per_axis[2][1] * betas[5] ** per_axis[2][2], 2)
    )
    counts = (
        bc(per_axis[0][1] + per_axis[0][2], 0)
        + bc(per_axis[1][1] + per_axis[1][2], 1)
        + bc(per_axis[2][1] + per_axis[2][2], 2)
    )
    if config.negative_reflection:
        att = att * np.where(counts % 2 == 0, 1.0, -1.0)
    if order_cap is not None:
        att = np.where(counts <= order_cap, att, 0.0)

    pattern = source.directivity
    if pattern.pattern != "omnidirectional":
        ori = source.orientation
        cos_theta = (
            ori[0] * bc(per_axis[0][3], 0) * dx
            + ori[1] * bc(per_axis[1][3], 1) * dy
            + ori[2] * bc(per_axis[2][3], 2) * dz
        ) / dist
        theta = np.arccos(np.clip(cos_theta, -1.0, 1.0))
        att = att * directivity_gain(pattern, theta)

    amps = (att / (4.0 * np.pi * dist)).ravel()
    delays = (dist / c).ravel() * sample_rate

    ir = np.zeros(n_out)
    if config.fractional_delay == "nearest":
        taps = np.round(delays).astype(np.int64)
        keep = (taps >= 0) & (taps < n_out) & (amps != 0.0)
        np.add.at(ir, taps[keep], amps[keep])
    else:
        keep = (delays < n_out + SINC_HALF_WIDTH) & (amps != 0.0)
        delays_k = delays[keep]
        amps_k = amps[keep]
        offsets = np.arange(-SINC_HALF_WIDTH, SINC_HALF_WIDTH + 1)
        for start in range(0, delays_k.size, 65536):
            d_blk = delays_k[start : start + 65536, np.newaxis]
            a_blk = amps_k[start : start + 65536, np.newaxis]
            centers = np.round(d_blk).astype(np.int64) + offsets
            frac = centers - d_blk
            window = 0.5 * (1.0 + np.cos(np.pi * frac / (SINC_HALF_WIDTH + 1)))
            taps = a_blk * np.sinc(frac) * window
            idx = centers.ravel()
            vals = taps.ravel()
            ok = (idx >= 0) & (idx < n_out)
            np.add.at(ir, idx[ok], vals[ok])

    if config.highpass_hz > 0:
        sos = butter(2, config.highpass_hz, btype="highpass", fs=sample_rate, output="sos")
        ir = sosfilt(sos, ir)

    meta = {
        "room": {
            "dimensions": list(room.dimensions),
            "reflectivity": list(betas),
            "speed_of_sound": c,
        },
        "source": {
            "position": list(source.position),
            "azimuth": source.azimuth,
            "elevation": source.elevation,
            "directivity": pattern.pattern,
        },
        "mic": {"id": mic.id, "position": list(mic.position)},
        "config": {
            "ir_length": config.ir_length,
            "max_reflection_order": config.max_reflection_order,
            "fractional_delay": config.fractional_delay,
            "highpass_hz": config.highpass_hz,
            "negative_reflection": config.negative_reflection,
        },
        "sample_rate": sample_rate,
    }
    out = ImpulseResponse(sample_rate, ir, provenance="image-method", meta=meta)
    direct_delay = np.linalg.norm(mic_pos - np.asarray(source.position)) / c
    out.direct_path_index = int(round(direct_delay * sample_rate))
    return out

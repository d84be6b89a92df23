"""Impulse-response persistence: mono float32 WAV plus a JSON sidecar.

The sidecar records provenance, sample rate, direct-path index and whatever
synthesis/measurement metadata the producer attached, so an IR on disk is
self-describing and reloadable without guesswork.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .core import AudioSignal, ImpulseResponse, ValidationError
from .wavio import read_wav, write_wav


def sidecar_path(wav_path: Union[str, Path]) -> Path:
    return Path(wav_path).with_suffix(".json")


def save_ir(path: Union[str, Path], ir: ImpulseResponse) -> None:
    """Write ``ir`` to a float32 WAV and its metadata sidecar."""
    write_wav(path, AudioSignal(ir.sample_rate, ir.samples), fmt="float32")
    record = {
        "sample_rate": ir.sample_rate,
        "provenance": ir.provenance,
        "direct_path_index": ir.direct_path_index,
        "meta": ir.meta,
    }
    sidecar_path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def load_ir(path: Union[str, Path]) -> ImpulseResponse:
    """Load an IR WAV, merging the sidecar metadata when present."""
    signal = read_wav(path)
    if signal.num_channels != 1:
        raise ValidationError(f"{path}: impulse responses must be mono")
    ir = ImpulseResponse(signal.sample_rate, signal.mono, provenance="measured")
    sc = sidecar_path(path)
    if sc.exists():
        record = json.loads(sc.read_text())
        ir.provenance = record.get("provenance", ir.provenance)
        ir.direct_path_index = record.get("direct_path_index")
        ir.meta = record.get("meta", {})
        if record.get("sample_rate") not in (None, signal.sample_rate):
            raise ValidationError(f"{path}: sidecar sample rate disagrees with the WAV")
    return ir

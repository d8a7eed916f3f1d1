"""Binary waveform files.

Layout (little-endian): magic ``b"PPE1"``, sample count u64, sample period
f64 (ps), samples per symbol u32, format tag u32, seed u64, then the samples
as interleaved f64 I/Q pairs.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import WaveformFormatError
from .signalgen import FORMAT_TAGS, UNKNOWN_FORMAT_TAG, ComplexSignal, FormatKind

MAGIC = b"PPE1"
HEADER = struct.Struct("<4sQdIIQ")
_TAG_TO_FORMAT = {v: k.value for k, v in FORMAT_TAGS.items()}


def _format_tag(meta):
    name = meta.get("format")
    if name is None:
        return UNKNOWN_FORMAT_TAG
    try:
        return FORMAT_TAGS[FormatKind.parse(name)]
    except ValueError:
        return UNKNOWN_FORMAT_TAG


def write_waveform(path, signal):
    seed = signal.meta.get("seed")
    seed = 0 if seed is None else int(seed)
    header = HEADER.pack(
        MAGIC,
        len(signal),
        float(signal.sample_period),
        int(signal.samples_per_symbol),
        _format_tag(signal.meta),
        seed,
    )
    payload = np.ascontiguousarray(signal.samples, dtype="<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_waveform(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise WaveformFormatError(f"{path}: file too short for a header")
    magic = raw[:4]
    if magic != MAGIC:
        if magic[:3] == MAGIC[:3]:
            raise WaveformFormatError(
                f"{path}: unsupported waveform version {magic!r} (expected {MAGIC!r})"
            )
        raise WaveformFormatError(f"{path}: bad magic {magic!r} (expected {MAGIC!r})")
    if len(raw) < HEADER.size:
        raise WaveformFormatError(
            f"{path}: truncated header ({len(raw)} of {HEADER.size} bytes)"
        )
    _, count, period, sps, tag, seed = HEADER.unpack_from(raw)
    body = len(raw) - HEADER.size
    expected = count * 16
    if body != expected:
        raise WaveformFormatError(
            f"{path}: payload holds {body / 16:g} samples, header declares {count} "
            f"(expected {expected} bytes, found {body})"
        )
    iq = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    samples = iq.view("<c16").astype(np.complex128)
    meta = {"format": _TAG_TO_FORMAT.get(tag), "format_tag": int(tag), "seed": int(seed),
            "source": os.fspath(path)}
    power = float(np.mean(np.abs(samples) ** 2)) if count else 0.0
    return ComplexSignal(
        samples=samples,
        sample_period=period,
        samples_per_symbol=int(sps),
        normalized=abs(power - 1.0) < 1e-12,
        meta=meta,
    )


def waveform_io(path, mode, signal=None):
    """Read (``mode="read"``) or write (``mode="write"``) a waveform file."""
    if mode == "write":
        if signal is None:
            raise ValueError("write mode needs a signal")
        write_waveform(path, signal)
        return None
    if mode == "read":
        return read_waveform(path)
    raise ValueError(f"mode must be 'read' or 'write', got {mode!r}")

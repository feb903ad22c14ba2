"""Minimal RIFF/WAVE reader and writer.

Supports PCM 16-bit and IEEE float 32-bit, mono or stereo (stereo is
averaged to mono on load). Parse failures raise :class:`AudioError`
with the byte offset of the problem. The float path round-trips
bit-exactly, which the synthetic data generator relies on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import AudioError


@dataclass
class AudioClip:
    samples: np.ndarray  # float32 in [-1, 1], mono
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path) -> AudioClip:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise AudioError("file too short for RIFF header", offset=0)
    if blob[0:4] != b"RIFF":
        raise AudioError("missing RIFF magic", offset=0)
    if blob[8:12] != b"WAVE":
        raise AudioError("missing WAVE form type", offset=8)

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4 : pos + 8])
        body_start = pos + 8
        if body_start + size > len(blob):
            raise AudioError(f"chunk {cid!r} overruns file", offset=pos)
        body = blob[body_start : body_start + size]
        if cid == b"fmt ":
            if size < 16:
                raise AudioError("fmt chunk too short", offset=body_start)
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = (body, body_start)
        pos = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise AudioError("no fmt chunk found", offset=12)
    if data is None:
        raise AudioError("no data chunk found", offset=12)
    audio_format, channels, rate, _, _, bits = fmt
    body, body_start = data

    if channels not in (1, 2):
        raise AudioError(f"unsupported channel count {channels}", offset=body_start)
    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(body[: len(body) - len(body) % 2], dtype="<i2")
        samples = raw.astype(np.float32) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(body[: len(body) - len(body) % 4], dtype="<f4")
        samples = raw.astype(np.float32)
    else:
        raise AudioError(
            f"unsupported codec (format {audio_format}, {bits}-bit)", offset=body_start
        )
    if channels == 2:
        samples = samples[: len(samples) // 2 * 2].reshape(-1, 2).mean(axis=1)
        samples = samples.astype(np.float32)
    return AudioClip(samples=samples, sample_rate=rate)


def save_wav(path, samples, sample_rate: int, fmt: str = "float32") -> None:
    """Write mono audio as float32 (default) or pcm16."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 1:
        raise ValueError("save_wav expects mono 1-D samples")
    if fmt == "float32":
        audio_format, bits = 3, 32
        payload = samples.astype("<f4").tobytes()
    elif fmt == "pcm16":
        audio_format, bits = 1, 16
        clipped = np.clip(samples, -1.0, 1.0 - 1.0 / 32768.0)
        payload = (np.rint(clipped * 32768.0).astype("<i2")).tobytes()
    else:
        raise ValueError(f"unknown wav format {fmt!r}")

    block_align = bits // 8
    byte_rate = sample_rate * block_align
    fmt_chunk = struct.pack("<HHIIHH", audio_format, 1, sample_rate, byte_rate,
                            block_align, bits)
    chunks = [b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk]
    if audio_format == 3:
        chunks.append(b"fact" + struct.pack("<II", 4, len(samples)))
    chunks.append(b"data" + struct.pack("<I", len(payload)) + payload)
    if len(payload) & 1:
        chunks.append(b"\x00")
    body = b"WAVE" + b"".join(chunks)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)

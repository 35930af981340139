"""Minimal RIFF/WAVE codec: PCM16 and IEEE float32, mono or stereo in,
mono out."""

from __future__ import annotations

import struct

import numpy as np

from .dsp import AudioBuffer
from .errors import ParseError, UnsupportedFormat

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

FORMATS = ("pcm16", "float32")


def _parse_fmt(body: bytes, offset: int):
    if len(body) < 16:
        raise ParseError("fmt chunk shorter than 16 bytes", offset)
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise ParseError("extensible fmt chunk shorter than 40 bytes", offset)
        # first two bytes of the sub-format GUID carry the real format tag
        (tag,) = struct.unpack_from("<H", body, 24)
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{channels} channels (only mono and stereo are supported)")
    if rate == 0:
        raise ParseError("sample rate of 0", offset + 4)
    if (tag, bits) == (WAVE_FORMAT_PCM, 16):
        dtype = np.dtype("<i2")
    elif (tag, bits) == (WAVE_FORMAT_IEEE_FLOAT, 32):
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedFormat(f"format tag 0x{tag:04x} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise ParseError(f"block_align {block_align} inconsistent with the format", offset + 12)
    return channels, rate, dtype


def decode_wav(data: bytes) -> AudioBuffer:
    if len(data) < 12:
        raise ParseError("file shorter than the RIFF header", len(data))
    riff, _size, wave = struct.unpack_from("<4sI4s", data)
    if riff != b"RIFF":
        raise ParseError(f"expected 'RIFF', found {riff!r}", 0)
    if wave != b"WAVE":
        raise ParseError(f"expected 'WAVE', found {wave!r}", 8)

    fmt = None
    samples = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body_start = pos + 8
        body_end = body_start + size
        if chunk_id == b"fmt ":
            if body_end > len(data):
                raise ParseError("fmt chunk runs past end of file", pos)
            fmt = _parse_fmt(data[body_start:body_end], body_start)
        elif chunk_id == b"data":
            if fmt is None:
                raise ParseError("data chunk before fmt chunk", pos)
            # tolerate a data chunk truncated by a writer that never patched the size
            body_end = min(body_end, len(data))
            channels, _rate, dtype = fmt
            block = channels * dtype.itemsize
            usable = (body_end - body_start) // block * block
            raw = np.frombuffer(data, dtype=dtype, count=usable // dtype.itemsize, offset=body_start)
            samples = raw.reshape(-1, channels)
        pos = body_end + (size & 1)
    if fmt is None:
        raise ParseError("no fmt chunk found", min(pos, len(data)))
    if samples is None:
        raise ParseError("no data chunk found", min(pos, len(data)))

    channels, rate, dtype = fmt
    if dtype.kind == "i":
        values = samples.astype(np.float64) / 32768.0
    else:
        values = samples.astype(np.float64)
    mono = values.mean(axis=1) if channels == 2 else values[:, 0]
    return AudioBuffer(mono, rate)


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def quantize_pcm16(samples) -> np.ndarray:
    """Clamp to [-1, 1], scale by 32767, round half away from zero."""
    scaled = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * 32767.0
    return (np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)).astype("<i2")


def encode_wav(audio: AudioBuffer, format: str = "float32") -> bytes:
    if format == "pcm16":
        payload = quantize_pcm16(audio.samples).tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    elif format == "float32":
        payload = audio.samples.astype("<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise UnsupportedFormat(f"unknown output format {format!r}")
    block = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        1,
        audio.sample_rate,
        audio.sample_rate * block,
        block,
        bits,
        b"data",
        len(payload),
    )
    return header + payload


def write_wav(path, audio: AudioBuffer, format: str = "float32") -> None:
    data = encode_wav(audio, format)
    with open(path, "wb") as fh:
        fh.write(data)

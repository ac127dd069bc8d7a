"""WAV decoding to a mono float signal, and Hann-windowed framing."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, MalformedRiff, UnsupportedEncoding

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

MIN_RATE, MAX_RATE = 8000, 192000


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class FrameSeries:
    frames: np.ndarray  # shape (n_frames, window_length)
    hop_s: float
    window_length: int
    frame_times: np.ndarray

    def __len__(self):
        return len(self.frames)


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        yield chunk_id, body, len(body) == size
        pos += 8 + size + (size & 1)


def _decode_pcm(raw: bytes, bits: int) -> np.ndarray:
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    # 24-bit: sign-extend three little-endian bytes into int32
    b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
    ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
    return ints.astype(np.float64) / float(1 << 23)


def read_wav(data: bytes) -> AudioBuffer:
    """Decode 16/24-bit PCM or 32-bit float WAV, downmixing stereo by mean."""
    data = bytes(data)
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedRiff("not a RIFF/WAVE container")

    fmt = None
    raw = None
    for chunk_id, body, complete in _chunks(data):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedRiff("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise MalformedRiff("extensible fmt chunk too short")
                # first two bytes of the subformat GUID carry the real format tag
                (sub,) = struct.unpack("<H", body[24:26])
                fmt = (sub,) + fmt[1:]
        elif chunk_id == b"data":
            # tolerate a data chunk whose declared size overruns the file
            raw = body
            if not complete:
                break
    if fmt is None:
        raise MalformedRiff("missing fmt chunk")
    if raw is None:
        raise MalformedRiff("missing data chunk")

    tag, channels, rate, _byte_rate, block_align, bits = fmt
    if tag == WAVE_FORMAT_PCM and bits in (16, 24):
        pass
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        pass
    else:
        raise UnsupportedEncoding(f"format tag 0x{tag:04x} with {bits} bits per sample")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels (only mono and stereo)")
    if not MIN_RATE <= rate <= MAX_RATE:
        raise UnsupportedEncoding(f"sample rate {rate} Hz")
    width = bits // 8
    if block_align != width * channels:
        raise MalformedRiff(f"block align {block_align} does not match {channels}x{bits} bits")

    usable = len(raw) - len(raw) % block_align
    raw = raw[:usable]
    if tag == WAVE_FORMAT_IEEE_FLOAT:
        samples = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        samples = np.nan_to_num(samples, nan=0.0, posinf=1.0, neginf=-1.0)
    else:
        samples = _decode_pcm(raw, bits)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(np.clip(samples, -1.0, 1.0), int(rate))


def load_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


def hann(window_length: int) -> np.ndarray:
    n = np.arange(window_length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window_length)


def frame_count(n_samples: int, window_length: int, hop_length: int) -> int:
    if n_samples <= window_length:
        return 1
    return math.ceil((n_samples - window_length) / hop_length) + 1


def frame_signal(buffer: AudioBuffer, window_length: int, hop_length: int) -> FrameSeries:
    if window_length <= 0 or hop_length <= 0:
        raise InvalidParams("window and hop lengths must be positive")
    if hop_length > window_length:
        raise InvalidParams(f"hop {hop_length} exceeds window {window_length}")

    n_frames = frame_count(len(buffer.samples), window_length, hop_length)
    padded_len = (n_frames - 1) * hop_length + window_length
    padded = np.zeros(padded_len)
    padded[: len(buffer.samples)] = buffer.samples
    starts = np.arange(n_frames) * hop_length
    frames = np.lib.stride_tricks.sliding_window_view(padded, window_length)[::hop_length][:n_frames]
    frames = frames * hann(window_length)
    times = (starts + window_length / 2) / buffer.sample_rate_hz
    return FrameSeries(frames, hop_length / buffer.sample_rate_hz, window_length, times)

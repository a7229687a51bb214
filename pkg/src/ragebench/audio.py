"""WAV decoding, mono/resample canonicalization, and deterministic test-signal synthesis.

The canonical processing format downstream of ingestion is mono at 22050 Hz.
Only RIFF/WAVE containers with 16-bit PCM or 32-bit IEEE float payloads are
accepted; everything else is out of scope.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    MalformedHeader,
    NyquistViolation,
    TruncatedData,
    UnsupportedEncoding,
)

CANONICAL_RATE = 22050

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3
_CLICK_SECONDS = 0.005


@dataclass(frozen=True)
class AudioBuffer:
    """Decoded audio: interleaved samples in [-1, 1] plus the sample rate.

    ``samples`` is one flat float64 array; for multichannel audio the frames
    are interleaved, so ``len(samples) = n_frames * channel_count``.
    """

    samples: np.ndarray
    sample_rate: int
    channel_count: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.channel_count <= 0:
            raise ValueError(f"channel_count must be positive, got {self.channel_count}")
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional (interleaved)")
        if samples.size and (np.max(samples) > 1.0 or np.min(samples) < -1.0):
            raise ValueError("samples must lie in [-1.0, 1.0]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / (self.sample_rate * self.channel_count)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic signal.

    ``kind`` is one of sine, saw, white_noise, click_track, silence, mix.
    ``parts`` holds the component specs for the mix kind.
    """

    kind: str
    frequency: float = 440.0
    bpm: float = 120.0
    phase_beats: float = 0.0  # click_track start offset, in beats
    amplitude: float = 1.0
    duration: float = 1.0
    seed: int = 0
    parts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("sine", "saw", "white_noise", "click_track", "silence", "mix"):
            raise ValueError(f"unknown synth kind: {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1]")


def decode_wav(data: bytes) -> AudioBuffer:
    """Parse a RIFF/WAVE byte string into an AudioBuffer.

    Accepts 16-bit PCM and 32-bit IEEE float payloads with 1 or 2 channels.
    16-bit sample s maps to s / 32768.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE container")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if chunk_id == b"fmt ":
            if body_start + 16 > len(data):
                raise TruncatedData("fmt chunk shorter than declared")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            if body_start + chunk_size > len(data):
                raise TruncatedData(
                    f"data chunk declares {chunk_size} bytes, "
                    f"only {len(data) - body_start} available"
                )
            payload = data[body_start : body_start + chunk_size]
        # chunks are word-aligned
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None or payload is None:
        raise MalformedHeader("missing fmt or data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"unsupported channel count {channels}")
    if rate <= 0:
        raise MalformedHeader(f"invalid sample rate {rate}")

    if audio_format == _FMT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedEncoding(
            f"unsupported encoding: format tag {audio_format}, {bits} bits"
        )

    # drop a trailing partial frame, if any
    usable = len(samples) - len(samples) % channels
    return AudioBuffer(samples[:usable], sample_rate=rate, channel_count=channels)


def encode_wav(buf: AudioBuffer) -> bytes:
    """Serialize a buffer as 16-bit PCM RIFF/WAVE."""
    ints = np.clip(np.rint(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    block_align = 2 * buf.channel_count
    byte_rate = buf.sample_rate * block_align
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = b"fmt " + struct.pack(
        "<IHHIIHH", 16, _FMT_PCM, buf.channel_count, buf.sample_rate, byte_rate, block_align, 16
    )
    return header + fmt + b"data" + struct.pack("<I", len(payload)) + payload


def read_wav(path) -> AudioBuffer:
    return decode_wav(Path(path).read_bytes())


def write_wav(path, buf: AudioBuffer) -> None:
    Path(path).write_bytes(encode_wav(buf))


def to_mono_resample(buf: AudioBuffer, target_rate: int = CANONICAL_RATE) -> AudioBuffer:
    """Average channels to mono and linearly resample to ``target_rate``."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    mono = buf.samples
    if buf.channel_count > 1:
        mono = mono.reshape(-1, buf.channel_count).mean(axis=1)
    if buf.sample_rate == target_rate:
        return AudioBuffer(mono, sample_rate=target_rate, channel_count=1)
    n_out = max(1, round(len(mono) * target_rate / buf.sample_rate))
    positions = np.arange(n_out, dtype=np.float64) * (buf.sample_rate / target_rate)
    resampled = np.interp(positions, np.arange(len(mono), dtype=np.float64), mono)
    return AudioBuffer(resampled, sample_rate=target_rate, channel_count=1)


def synth_signal(spec: SynthSpec, sample_rate: int = CANONICAL_RATE) -> AudioBuffer:
    """Render a SynthSpec to samples; identical (spec, rate) give identical output."""
    n = round(spec.duration * sample_rate)
    if spec.kind in ("sine", "saw") and spec.frequency >= sample_rate / 2:
        raise NyquistViolation(
            f"frequency {spec.frequency} Hz >= Nyquist {sample_rate / 2} Hz"
        )

    if spec.kind == "silence":
        samples = np.zeros(n)
    elif spec.kind == "sine":
        t = np.arange(n) / sample_rate
        samples = spec.amplitude * np.sin(2.0 * np.pi * spec.frequency * t)
    elif spec.kind == "saw":
        t = np.arange(n) / sample_rate
        samples = spec.amplitude * (2.0 * np.mod(spec.frequency * t, 1.0) - 1.0)
    elif spec.kind == "white_noise":
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        samples = rng.uniform(-spec.amplitude, spec.amplitude, n)
    elif spec.kind == "click_track":
        samples = _click_track(spec, sample_rate, n)
    elif spec.kind == "mix":
        samples = np.zeros(n)
        for part in spec.parts:
            rendered = synth_signal(part, sample_rate).samples
            m = min(n, len(rendered))
            samples[:m] += rendered[:m]
        samples = np.clip(spec.amplitude * samples, -1.0, 1.0)
    else:  # pragma: no cover - guarded by SynthSpec validation
        raise ValueError(spec.kind)

    return AudioBuffer(samples, sample_rate=sample_rate, channel_count=1)


def _click_track(spec: SynthSpec, sample_rate: int, n: int) -> np.ndarray:
    """One 5 ms decaying-noise burst per beat, the first at t = phase_beats beats."""
    samples = np.zeros(n)
    period = 60.0 / spec.bpm
    n_clicks = math.ceil(spec.duration * spec.bpm / 60.0 - 1e-9)
    burst_len = max(1, round(_CLICK_SECONDS * sample_rate))
    decay = np.exp(-np.arange(burst_len) / (burst_len / 4.0))
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    for k in range(n_clicks):
        start = round((k + spec.phase_beats) * period * sample_rate)
        if start >= n:
            break
        burst = rng.uniform(-1.0, 1.0, burst_len) * decay * spec.amplitude
        stop = min(n, start + burst_len)
        if start < 0:
            continue
        samples[start:stop] += burst[: stop - start]
    return np.clip(samples, -1.0, 1.0)


def click_onset_times(spec: SynthSpec) -> np.ndarray:
    """Ground-truth click onset times (seconds) for a click_track spec."""
    n_clicks = math.ceil(spec.duration * spec.bpm / 60.0 - 1e-9)
    return np.arange(n_clicks) * (60.0 / spec.bpm)

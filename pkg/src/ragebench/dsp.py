"""Shared signal-processing primitives: framing, STFT, mel filterbank, DCT,
2-D median filtering, and the onset-strength envelope.

Conventions (librosa-compatible): frame length 2048, hop 512, periodic Hann
window, reflect center-padding, HTK mel scale, log floor 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import EmptySignal, InvalidBand

FRAME_LENGTH = 2048
HOP_LENGTH = 512
N_MELS = 40
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude spectrogram [n_bins x n_frames] with its framing parameters."""

    magnitudes: np.ndarray
    sample_rate: int
    frame_length: int
    hop_length: int

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * (self.sample_rate / self.frame_length)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length


@dataclass(frozen=True)
class OnsetEnvelope:
    """Per-frame onset strength (nonnegative) at ``frame_rate`` frames/second."""

    values: np.ndarray
    frame_rate: float


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, as used for STFT analysis
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """Center-padded (reflect) frames of ``x`` as rows: [n_frames x frame_length].

    n_frames = 1 + floor(len(x) / hop_length).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise EmptySignal("cannot frame an empty signal")
    pad = frame_length // 2
    if x.size <= pad:
        raise EmptySignal(
            f"signal of {x.size} samples is too short for frame length {frame_length}"
        )
    padded = np.pad(x, pad, mode="reflect")
    n_frames = 1 + x.size // hop_length
    windows = np.lib.stride_tricks.sliding_window_view(padded, frame_length)
    return windows[:: hop_length][:n_frames]


def stft(
    buf: AudioBuffer,
    frame_length: int = FRAME_LENGTH,
    hop_length: int = HOP_LENGTH,
) -> Spectrogram:
    """Hann-windowed magnitude STFT of a mono buffer."""
    if frame_length <= 0 or frame_length & (frame_length - 1):
        raise ValueError(f"frame_length must be a power of two, got {frame_length}")
    if hop_length <= 0 or hop_length > frame_length:
        raise ValueError("hop_length must be in (0, frame_length]")
    if buf.channel_count != 1:
        raise ValueError("stft expects a mono buffer")
    frames = frame_signal(buf.samples, frame_length, hop_length)
    spectrum = np.fft.rfft(frames * hann_window(frame_length), axis=1)
    return Spectrogram(
        magnitudes=np.abs(spectrum).T,
        sample_rate=buf.sample_rate,
        frame_length=frame_length,
        hop_length=hop_length,
    )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    sample_rate: int,
    frame_length: int,
    n_mels: int = N_MELS,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> np.ndarray:
    """Triangular HTK-mel filters, area-normalized: [n_mels x n_bins]."""
    if fmax is None:
        fmax = sample_rate / 2.0
    if fmin >= fmax:
        raise InvalidBand(f"fmin {fmin} must be below fmax {fmax}")
    if fmax > sample_rate / 2.0:
        raise InvalidBand(f"fmax {fmax} exceeds Nyquist {sample_rate / 2.0}")

    n_bins = frame_length // 2 + 1
    bin_freqs = np.arange(n_bins) * (sample_rate / frame_length)
    corners = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))

    weights = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        lo, peak, hi = corners[i], corners[i + 1], corners[i + 2]
        rising = (bin_freqs - lo) / (peak - lo)
        falling = (hi - bin_freqs) / (hi - peak)
        tri = np.minimum(rising, falling)
        # area normalization: unit integral over frequency
        weights[i] = np.maximum(0.0, tri) * (2.0 / (hi - lo))
    return weights


def mel_spectrogram(
    spec: Spectrogram,
    n_mels: int = N_MELS,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> np.ndarray:
    """Mel-band power matrix [n_mels x n_frames] (filterbank applied to power)."""
    fb = mel_filterbank(spec.sample_rate, spec.frame_length, n_mels, fmin, fmax)
    return fb @ (spec.magnitudes**2)


def dct_ii_orthonormal(v: np.ndarray, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II along the last axis; coefficient 0 = mean * sqrt(N)."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[-1]
    if n_out > n:
        raise ValueError(f"n_out {n_out} exceeds input length {n}")
    k = np.arange(n_out)[:, None]
    phase = np.pi * (2.0 * np.arange(n)[None, :] + 1.0) * k / (2.0 * n)
    basis = np.cos(phase) * np.sqrt(2.0 / n)
    basis[0] = np.sqrt(1.0 / n)
    return v @ basis.T


def median_filter_2d(m: np.ndarray, time_width: int, freq_width: int) -> np.ndarray:
    """Per-element median over a (freq_width x time_width) reflect-padded window.

    Matrix convention is [freq x time]; widths of 1 skip that axis entirely.
    """
    for w in (time_width, freq_width):
        if w < 1 or w % 2 == 0:
            raise ValueError(f"window widths must be odd and >= 1, got {w}")
    m = np.asarray(m, dtype=np.float64)
    if time_width == 1 and freq_width == 1:
        return m.copy()
    pad_f, pad_t = freq_width // 2, time_width // 2
    if pad_f > m.shape[0] - 1 or pad_t > m.shape[1] - 1:
        raise ValueError(
            f"matrix {m.shape} too small for window ({freq_width}, {time_width})"
        )
    padded = np.pad(m, ((pad_f, pad_f), (pad_t, pad_t)), mode="reflect")

    out = np.empty_like(m)
    # chunk along frequency to bound the sliding-window workspace
    chunk = max(1, int(4e6 // (m.shape[1] * time_width * freq_width)))
    for start in range(0, m.shape[0], chunk):
        stop = min(m.shape[0], start + chunk)
        block = padded[start : stop + 2 * pad_f, :]
        view = np.lib.stride_tricks.sliding_window_view(block, (freq_width, time_width))
        out[start:stop] = np.median(view, axis=(2, 3))
    return out


def log_compress(mel: np.ndarray) -> np.ndarray:
    return np.log(mel + LOG_FLOOR)


def onset_strength(
    log_mel: np.ndarray,
    frame_rate: float,
    center_lag: int = FRAME_LENGTH // (2 * HOP_LENGTH),
) -> OnsetEnvelope:
    """Mean half-wave-rectified first difference of a log mel spectrogram.

    Center-padded analysis windows register an event ``center_lag`` frames
    before its onset time; the envelope is delayed by that amount so peaks
    line up with event frames.
    """
    flux = np.maximum(0.0, np.diff(log_mel, axis=1))
    values = np.concatenate([np.zeros(1 + center_lag), flux.mean(axis=0)])
    values = values[: log_mel.shape[1]]
    return OnsetEnvelope(values=values, frame_rate=frame_rate)

"""Per-track feature extraction: the frozen 28-field acoustic descriptor row.

Field order is fixed and shared with the CSV schema; see FEATURE_NAMES.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .dsp import (
    FRAME_LENGTH,
    HOP_LENGTH,
    LOG_FLOOR,
    N_MELS,
    OnsetEnvelope,
    Spectrogram,
    dct_ii_orthonormal,
    frame_signal,
    log_compress,
    median_filter_2d,
    mel_spectrogram,
    onset_strength,
    stft,
)
from .errors import TooShort

N_MFCC = 13

FEATURE_NAMES: tuple[str, ...] = (
    "length_sec",
    "tempo_bpm",
    "beat_strength",
    "onset_rate",
    "rms_mean",
    "spectral_centroid_mean",
    "spectral_rolloff_mean",
    "spectral_flatness_mean",
    "zcr_mean",
    *(f"mfcc{i}" for i in range(1, N_MFCC + 1)),
    "chroma_mean",
    "chroma_std",
    "pitch_mean",
    "pitch_std",
    "harmonic_ratio",
    "percussive_ratio",
)

N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction knobs; defaults are the repo conventions."""

    frame_length: int = FRAME_LENGTH
    hop_length: int = HOP_LENGTH
    n_mels: int = N_MELS
    rolloff_percent: float = 0.85
    tempo_min: float = 60.0
    tempo_max: float = 200.0
    tempo_prior_bpm: float = 120.0
    onset_peak_std: float = 0.3
    pitch_fmin: float = 65.0
    pitch_fmax: float = 2093.0
    yin_threshold: float = 0.1
    hpss_width: int = 31


DEFAULT_CONFIG = FeatureConfig()


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame fundamental frequency estimates and voicing decisions."""

    f0: np.ndarray
    voiced: np.ndarray

    @property
    def voiced_fraction(self) -> float:
        return float(np.mean(self.voiced)) if self.voiced.size else 0.0


def spectral_descriptors(
    spec: Spectrogram, buf: AudioBuffer, cfg: FeatureConfig = DEFAULT_CONFIG
) -> dict:
    """Frame-averaged centroid, rolloff, flatness, zero-crossing rate and RMS."""
    mags = spec.magnitudes
    freqs = spec.bin_frequencies
    mag_sums = mags.sum(axis=0)
    nonzero = mag_sums > 0

    centroid = np.zeros(spec.n_frames)
    centroid[nonzero] = (freqs @ mags[:, nonzero]) / mag_sums[nonzero]

    cumulative = np.cumsum(mags, axis=0)
    rolloff = np.zeros(spec.n_frames)
    if np.any(nonzero):
        target = cfg.rolloff_percent * mag_sums[nonzero]
        idx = np.argmax(cumulative[:, nonzero] >= target[None, :], axis=0)
        rolloff[nonzero] = freqs[idx]

    power = mags**2 + LOG_FLOOR
    flatness = np.exp(np.mean(np.log(power), axis=0)) / np.mean(power, axis=0)

    frames = frame_signal(buf.samples, spec.frame_length, spec.hop_length)
    signs = np.signbit(frames)
    zcr = np.count_nonzero(signs[:, 1:] != signs[:, :-1], axis=1) / spec.frame_length
    rms = np.sqrt(np.mean(frames**2, axis=1))

    return {
        "centroid_mean": float(centroid.mean()),
        "rolloff_mean": float(rolloff.mean()),
        "flatness_mean": float(flatness.mean()),
        "zcr_mean": float(zcr.mean()),
        "rms_mean": float(rms.mean()),
    }


def mfcc_features(
    buf: AudioBuffer,
    cfg: FeatureConfig = DEFAULT_CONFIG,
    mel: np.ndarray | None = None,
) -> np.ndarray:
    """Time-averaged MFCC1..MFCC13 (MFCC1 is DCT coefficient 0)."""
    if mel is None:
        mel = mel_spectrogram(stft(buf, cfg.frame_length, cfg.hop_length), cfg.n_mels)
    coeffs = dct_ii_orthonormal(log_compress(mel).T, N_MFCC)
    return coeffs.mean(axis=0)


def chroma_features(spec: Spectrogram) -> dict:
    """Grand mean/std of the per-frame max-normalized 12-class chromagram."""
    freqs = spec.bin_frequencies[1:]  # DC bin carries no pitch class
    classes = np.mod(np.round(12.0 * np.log2(freqs / 440.0)).astype(int), 12)
    chroma = np.zeros((12, spec.n_frames))
    np.add.at(chroma, classes, spec.magnitudes[1:])
    peaks = chroma.max(axis=0)
    nonzero = peaks > 0
    chroma[:, nonzero] /= peaks[nonzero]
    return {
        "chroma_mean": float(chroma.mean()),
        "chroma_std": float(chroma.std()),
        "chromagram": chroma,
    }


def pitch_track(buf: AudioBuffer, cfg: FeatureConfig = DEFAULT_CONFIG) -> PitchTrack:
    """YIN-style per-frame f0: cumulative-mean-normalized difference with
    absolute threshold, local-minimum refinement and parabolic interpolation."""
    sr = buf.sample_rate
    frames = frame_signal(buf.samples, cfg.frame_length, cfg.hop_length)
    n_frames = len(frames)
    window = cfg.frame_length // 2
    tau_max = min(int(sr / cfg.pitch_fmin), cfg.frame_length - window)
    tau_min = max(2, int(sr / cfg.pitch_fmax))

    # difference function via FFT cross-correlation:
    # d(tau) = sum_j (x_j - x_{j+tau})^2 over j < window
    head = frames[:, :window]
    spectrum_full = np.fft.rfft(frames, n=cfg.frame_length, axis=1)
    spectrum_head = np.fft.rfft(head, n=cfg.frame_length, axis=1)
    corr = np.fft.irfft(spectrum_full * np.conj(spectrum_head), n=cfg.frame_length, axis=1)
    energy = np.concatenate(
        [np.zeros((n_frames, 1)), np.cumsum(frames**2, axis=1)], axis=1
    )
    taus = np.arange(tau_max + 1)
    tail_energy = energy[:, taus + window] - energy[:, taus]
    head_energy = tail_energy[:, :1]
    diff = np.maximum(0.0, head_energy + tail_energy - 2.0 * corr[:, : tau_max + 1])

    # cumulative-mean normalization
    running = np.cumsum(diff[:, 1:], axis=1)
    cmnd = np.ones_like(diff)
    positive = running > 0
    cmnd[:, 1:][positive] = (diff[:, 1:] * taus[1:])[positive] / running[positive]

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for i in range(n_frames):
        row = cmnd[i]
        below = np.nonzero(row[tau_min : tau_max + 1] < cfg.yin_threshold)[0]
        if below.size == 0:
            continue
        tau = tau_min + below[0]
        while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
            tau += 1
        tau_hat = float(tau)
        if 0 < tau < tau_max:
            lower, mid, upper = row[tau - 1], row[tau], row[tau + 1]
            denom = lower - 2.0 * mid + upper
            if abs(denom) > 1e-12:
                tau_hat += float(np.clip(0.5 * (lower - upper) / denom, -1.0, 1.0))
        candidate = sr / tau_hat
        if cfg.pitch_fmin <= candidate <= cfg.pitch_fmax:
            f0[i] = candidate
            voiced[i] = True
    return PitchTrack(f0=f0, voiced=voiced)


def pitch_features(buf: AudioBuffer, cfg: FeatureConfig = DEFAULT_CONFIG) -> dict:
    track = pitch_track(buf, cfg)
    if not np.any(track.voiced):
        return {"pitch_mean": 0.0, "pitch_std": 0.0}
    voiced_f0 = track.f0[track.voiced]
    return {"pitch_mean": float(voiced_f0.mean()), "pitch_std": float(voiced_f0.std())}


def hpss_ratios(spec: Spectrogram, cfg: FeatureConfig = DEFAULT_CONFIG) -> dict:
    """Energy split between median-filtered harmonic and percussive components.

    harmonic_ratio + percussive_ratio = 1 by construction.
    """
    s = spec.magnitudes
    harm = median_filter_2d(s, time_width=cfg.hpss_width, freq_width=1)
    perc = median_filter_2d(s, time_width=1, freq_width=cfg.hpss_width)
    h2, p2 = harm**2, perc**2
    denom = h2 + p2 + 1e-10
    harmonic_energy = float(np.sum((h2 / denom * s) ** 2))
    percussive_energy = float(np.sum((p2 / denom * s) ** 2))
    total = harmonic_energy + percussive_energy
    harmonic_ratio = harmonic_energy / total if total > 0 else 0.5
    return {"harmonic_ratio": harmonic_ratio, "percussive_ratio": 1.0 - harmonic_ratio}


def _autocorrelate(x: np.ndarray) -> np.ndarray:
    # biased estimate (constant normalizer): longer lags score lower, which
    # suppresses subharmonic tempo peaks
    n = len(x)
    centered = x - x.mean()
    return np.correlate(centered, centered, mode="full")[n - 1 :] / n


# beat times quantize to the frame grid, which can split the fundamental
# autocorrelation peak across two lags while leaving the two-beat lag sharp;
# light symmetric smoothing makes half-frame misalignments cheap
_TEMPO_SMOOTHING = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 9.0


def rhythm_features(env: OnsetEnvelope, cfg: FeatureConfig = DEFAULT_CONFIG) -> dict:
    """Tempo (autocorrelation + log-normal prior), beats, beat strength, onset rate."""
    values = env.values
    n = len(values)
    duration = n / env.frame_rate
    if n < 4 or not np.any(values > 0):
        return {"tempo_bpm": 0.0, "beat_frames": np.array([], dtype=int),
                "beat_strength": 0.0, "onset_rate": 0.0}

    ac = _autocorrelate(np.convolve(values, _TEMPO_SMOOTHING, mode="same"))
    bpm_grid = np.arange(cfg.tempo_min, cfg.tempo_max + 1e-9, 0.1)
    lags = 60.0 * env.frame_rate / bpm_grid
    usable = lags <= n - 1
    bpm_grid, lags = bpm_grid[usable], lags[usable]
    if bpm_grid.size == 0:
        return {"tempo_bpm": 0.0, "beat_frames": np.array([], dtype=int),
                "beat_strength": 0.0, "onset_rate": _onset_rate(values, duration, cfg)}
    strength = np.interp(lags, np.arange(len(ac)), ac)
    prior = np.exp(-0.5 * np.log2(bpm_grid / cfg.tempo_prior_bpm) ** 2)
    best = int(np.argmax(strength * prior))
    # refine past the integer-lag quantization of the envelope autocorrelation
    lag = _parabolic_peak(ac, lags[best])
    tempo = float(np.clip(60.0 * env.frame_rate / lag, cfg.tempo_min, cfg.tempo_max))

    beat_frames = _track_beats(values, env.frame_rate, tempo)
    mean_env = values.mean()
    beat_strength = float(values[beat_frames].mean() / mean_env) if mean_env > 0 else 0.0

    return {
        "tempo_bpm": tempo,
        "beat_frames": beat_frames,
        "beat_strength": beat_strength,
        "onset_rate": _onset_rate(values, duration, cfg),
    }


def _parabolic_peak(ac: np.ndarray, lag: float) -> float:
    """Vertex of the parabola through the integer-lag peak nearest ``lag``."""
    center = int(round(lag))
    if not 1 <= center <= len(ac) - 2:
        return lag
    # hill-climb to the local maximum before fitting
    while 1 <= center - 1 and ac[center - 1] > ac[center]:
        center -= 1
    while center + 2 <= len(ac) - 1 and ac[center + 1] > ac[center]:
        center += 1
    lower, mid, upper = ac[center - 1], ac[center], ac[center + 1]
    denom = lower - 2.0 * mid + upper
    if abs(denom) < 1e-12:
        return float(center)
    return center + float(np.clip(0.5 * (lower - upper) / denom, -1.0, 1.0))


def _track_beats(values: np.ndarray, frame_rate: float, tempo: float) -> np.ndarray:
    """Greedy peak-picking at the tempo period +-10%, seeded at the global max."""
    period = 60.0 * frame_rate / tempo
    n = len(values)
    anchor = int(np.argmax(values))
    beats = [anchor]
    pos = anchor
    while True:
        lo, hi = int(round(pos + 0.9 * period)), int(round(pos + 1.1 * period))
        if lo >= n:
            break
        hi = min(hi, n - 1)
        pos = lo + int(np.argmax(values[lo : hi + 1]))
        beats.append(pos)
    pos = anchor
    while True:
        hi, lo = int(round(pos - 0.9 * period)), int(round(pos - 1.1 * period))
        if hi < 0:
            break
        lo = max(lo, 0)
        pos = lo + int(np.argmax(values[lo : hi + 1]))
        beats.append(pos)
    return np.array(sorted(beats), dtype=int)


def _onset_rate(values: np.ndarray, duration: float, cfg: FeatureConfig) -> float:
    """Peaks = local maxima over +-3 frames above mean + k*std, then / seconds."""
    threshold = values.mean() + cfg.onset_peak_std * values.std()
    count = 0
    last = -4
    for i in range(len(values)):
        lo, hi = max(0, i - 3), min(len(values), i + 4)
        if values[i] > threshold and values[i] >= values[lo:hi].max() and i - last > 3:
            count += 1
            last = i
    return count / duration


def extract_features(buf: AudioBuffer, cfg: FeatureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Compute the full 28-field vector from a canonical (mono) buffer."""
    if buf.channel_count != 1:
        raise ValueError("extract_features expects a mono buffer")
    if buf.duration_seconds < 1.0:
        raise TooShort(f"buffer is {buf.duration_seconds:.3f} s; need >= 1 s")

    spec = stft(buf, cfg.frame_length, cfg.hop_length)
    mel = mel_spectrogram(spec, cfg.n_mels)
    env = onset_strength(log_compress(mel), spec.frame_rate,
                         center_lag=cfg.frame_length // (2 * cfg.hop_length))

    descriptors = spectral_descriptors(spec, buf, cfg)
    mfcc = mfcc_features(buf, cfg, mel=mel)
    chroma = chroma_features(spec)
    pitch = pitch_features(buf, cfg)
    hpss = hpss_ratios(spec, cfg)
    rhythm = rhythm_features(env, cfg)

    row = np.empty(N_FEATURES)
    row[FEATURE_INDEX["length_sec"]] = buf.duration_seconds
    row[FEATURE_INDEX["tempo_bpm"]] = rhythm["tempo_bpm"]
    row[FEATURE_INDEX["beat_strength"]] = rhythm["beat_strength"]
    row[FEATURE_INDEX["onset_rate"]] = rhythm["onset_rate"]
    row[FEATURE_INDEX["rms_mean"]] = descriptors["rms_mean"]
    row[FEATURE_INDEX["spectral_centroid_mean"]] = descriptors["centroid_mean"]
    row[FEATURE_INDEX["spectral_rolloff_mean"]] = descriptors["rolloff_mean"]
    row[FEATURE_INDEX["spectral_flatness_mean"]] = descriptors["flatness_mean"]
    row[FEATURE_INDEX["zcr_mean"]] = descriptors["zcr_mean"]
    for i in range(N_MFCC):
        row[FEATURE_INDEX[f"mfcc{i + 1}"]] = mfcc[i]
    row[FEATURE_INDEX["chroma_mean"]] = chroma["chroma_mean"]
    row[FEATURE_INDEX["chroma_std"]] = chroma["chroma_std"]
    row[FEATURE_INDEX["pitch_mean"]] = pitch["pitch_mean"]
    row[FEATURE_INDEX["pitch_std"]] = pitch["pitch_std"]
    row[FEATURE_INDEX["harmonic_ratio"]] = hpss["harmonic_ratio"]
    row[FEATURE_INDEX["percussive_ratio"]] = hpss["percussive_ratio"]
    return row

import struct

import numpy as np
import pytest

from ragebench.audio import (
    AudioBuffer,
    SynthSpec,
    click_onset_times,
    decode_wav,
    encode_wav,
    synth_signal,
    to_mono_resample,
)
from ragebench.errors import (
    MalformedHeader,
    NyquistViolation,
    TruncatedData,
    UnsupportedEncoding,
)

SR = 22050


def make_wav(samples_i16, rate=SR, channels=1, fmt=1, bits=16):
    payload = np.asarray(samples_i16).astype("<i2").tobytes() if bits == 16 \
        else np.asarray(samples_i16).astype("<f4").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt_chunk = b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt, channels, rate, rate * channels * bits // 8,
        channels * bits // 8, bits)
    return header + fmt_chunk + b"data" + struct.pack("<I", len(payload)) + payload


class TestDecode:
    def test_zeros_one_second(self):
        buf = decode_wav(make_wav(np.zeros(SR, dtype=np.int16)))
        assert len(buf.samples) == SR
        assert np.all(buf.samples == 0.0)
        assert buf.sample_rate == SR

    def test_scaling_convention(self):
        buf = decode_wav(make_wav([32767]))
        assert buf.samples[0] == pytest.approx(32767 / 32768)

    def test_rejects_bad_magic(self):
        data = make_wav([0, 0])
        with pytest.raises(MalformedHeader):
            decode_wav(b"RIFX" + data[4:])

    def test_rejects_unsupported_bits(self):
        data = bytearray(make_wav([0, 0]))
        data[34] = 8  # bits per sample
        with pytest.raises(UnsupportedEncoding):
            decode_wav(bytes(data))

    def test_truncated_data(self):
        data = make_wav(np.zeros(100, dtype=np.int16))
        with pytest.raises(TruncatedData):
            decode_wav(data[:-10])

    def test_float32_payload(self):
        buf = decode_wav(make_wav(np.array([0.5, -0.25]), fmt=3, bits=32))
        assert buf.samples == pytest.approx([0.5, -0.25])

    def test_stereo_preserved(self):
        buf = decode_wav(make_wav(np.array([100, 200, 300, 400], dtype=np.int16),
                                  channels=2))
        assert buf.channel_count == 2
        assert len(buf.samples) == 4

    def test_roundtrip_within_quantization(self):
        rng = np.random.Generator(np.random.PCG64(0))
        original = AudioBuffer(rng.uniform(-1, 1, 500), sample_rate=SR)
        decoded = decode_wav(encode_wav(original))
        assert np.max(np.abs(decoded.samples - original.samples)) <= 2**-15


class TestMonoResample:
    def test_stereo_identical_channels(self):
        mono = np.linspace(-0.5, 0.5, 100)
        stereo = AudioBuffer(np.repeat(mono, 2), sample_rate=SR, channel_count=2)
        out = to_mono_resample(stereo, SR)
        assert np.allclose(out.samples, mono)

    def test_length_halves(self):
        buf = AudioBuffer(np.zeros(44100), sample_rate=44100)
        out = to_mono_resample(buf, 22050)
        assert abs(len(out.samples) - 22050) <= 1

    def test_constant_preserved(self):
        buf = AudioBuffer(np.full(1000, 0.5), sample_rate=48000)
        out = to_mono_resample(buf, 22050)
        assert np.allclose(out.samples, 0.5)

    def test_idempotent_when_canonical(self):
        rng = np.random.Generator(np.random.PCG64(1))
        buf = AudioBuffer(rng.uniform(-1, 1, 2000), sample_rate=SR)
        out = to_mono_resample(buf, SR)
        assert np.array_equal(out.samples, buf.samples)

    def test_duration_within_one_sample(self):
        buf = AudioBuffer(np.zeros(12345), sample_rate=44100)
        out = to_mono_resample(buf, 22050)
        assert abs(out.duration_seconds - buf.duration_seconds) <= 1 / 22050


class TestSynth:
    def test_sine_rms(self):
        buf = synth_signal(SynthSpec("sine", frequency=440.0, amplitude=1.0,
                                     duration=1.0), SR)
        assert len(buf.samples) == SR
        assert np.sqrt(np.mean(buf.samples**2)) == pytest.approx(0.7071, abs=1e-3)

    def test_click_count(self):
        spec = SynthSpec("click_track", bpm=120.0, duration=10.0, seed=1)
        onsets = click_onset_times(spec)
        assert len(onsets) == 20
        buf = synth_signal(spec, SR)
        for t in onsets:
            start = round(t * SR)
            assert np.any(buf.samples[start : start + 120] != 0.0)

    def test_noise_deterministic(self):
        a = synth_signal(SynthSpec("white_noise", seed=7, duration=1.0), SR)
        b = synth_signal(SynthSpec("white_noise", seed=7, duration=1.0), SR)
        assert np.array_equal(a.samples, b.samples)

    def test_nyquist_violation(self):
        with pytest.raises(NyquistViolation):
            synth_signal(SynthSpec("sine", frequency=12000.0, duration=0.5), SR)

    def test_mix_respects_invariants(self):
        parts = tuple(
            SynthSpec("sine", frequency=f, amplitude=1.0, duration=0.5)
            for f in (220.0, 330.0, 440.0)
        )
        buf = synth_signal(SynthSpec("mix", duration=0.5, parts=parts), SR)
        assert np.max(np.abs(buf.samples)) <= 1.0

    def test_invalid_kind_rejected(self):
        with pytest.raises(ValueError):
            SynthSpec("square")

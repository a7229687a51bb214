"""Deterministic synthetic corpus: rage-like clips (fast click grid, saw stabs,
noise bursts) versus non-rage clips (slower grid, sine pads, sparse onsets).

Every clip is generated from a per-file seed derived from (corpus seed, index),
so the corpus is byte-identical across reruns and synthesis order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import AudioBuffer, SynthSpec, synth_signal, write_wav
from .data import write_labels_csv

RAGE_TEMPO_RANGE = (150.0, 170.0)
NONRAGE_TEMPO_RANGE = (85.0, 115.0)
# clips below ~5 s leave too few beats for reliable tempo autocorrelation at
# the fast end of the rage band
DURATION_RANGE = (5.0, 7.0)


def _file_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index))))


def rage_clip_spec(rng: np.random.Generator) -> tuple[SynthSpec, dict]:
    tempo = rng.uniform(*RAGE_TEMPO_RANGE)
    duration = rng.uniform(*DURATION_RANGE)
    saw_freq = rng.uniform(80.0, 400.0)
    seeds = [int(s) for s in rng.integers(0, 2**62, size=3)]
    parts = (
        # fast click grid, reinforced by a second burst layer on the same beats
        SynthSpec("click_track", bpm=tempo, amplitude=rng.uniform(0.5, 0.7),
                  duration=duration, seed=seeds[0]),
        SynthSpec("click_track", bpm=tempo, amplitude=rng.uniform(0.25, 0.4),
                  duration=duration, seed=seeds[1]),
        SynthSpec("saw", frequency=saw_freq, amplitude=rng.uniform(0.15, 0.3),
                  duration=duration),
        SynthSpec("white_noise", amplitude=rng.uniform(0.025, 0.05),
                  duration=duration, seed=seeds[2]),
    )
    spec = SynthSpec("mix", duration=duration, parts=parts)
    params = {
        "class": "rage", "tempo_bpm": tempo, "duration": duration,
        "saw_freq": saw_freq, "part_seeds": seeds,
    }
    return spec, params


def nonrage_clip_spec(rng: np.random.Generator) -> tuple[SynthSpec, dict]:
    # click level and noise floor are kept close to the rage ranges so the
    # brightness/energy features overlap between classes and the class signal
    # concentrates in rhythm (tempo, onset density, beat strength) + flatness
    tempo = rng.uniform(*NONRAGE_TEMPO_RANGE)
    duration = rng.uniform(*DURATION_RANGE)
    pad_freqs = [float(f) for f in rng.uniform(110.0, 880.0, size=2)]
    seeds = [int(s) for s in rng.integers(0, 2**62, size=2)]
    parts = (
        SynthSpec("click_track", bpm=tempo, amplitude=rng.uniform(0.55, 0.8),
                  duration=duration, seed=seeds[0]),
        SynthSpec("sine", frequency=pad_freqs[0], amplitude=rng.uniform(0.12, 0.22),
                  duration=duration),
        SynthSpec("sine", frequency=pad_freqs[1], amplitude=rng.uniform(0.08, 0.16),
                  duration=duration),
        SynthSpec("white_noise", amplitude=rng.uniform(0.015, 0.035),
                  duration=duration, seed=seeds[1]),
    )
    spec = SynthSpec("mix", duration=duration, parts=parts)
    params = {
        "class": "non_rage", "tempo_bpm": tempo, "duration": duration,
        "pad_freqs": pad_freqs, "part_seeds": seeds,
    }
    return spec, params


def synth_clip(seed: int, index: int, label: int, sample_rate: int = 22050):
    """Render clip ``index``; label 1 is rage-like. Returns (buffer, params)."""
    rng = _file_rng(seed, index)
    spec, params = rage_clip_spec(rng) if label == 1 else nonrage_clip_spec(rng)
    return synth_signal(spec, sample_rate), params


def corpus_plan(n_per_class: int) -> list[tuple[int, int, str]]:
    """(index, label, filename) for every clip; rage first, then non-rage."""
    plan = []
    for i in range(n_per_class):
        plan.append((i, 1, f"rage_{i:04d}.wav"))
    for i in range(n_per_class):
        plan.append((n_per_class + i, 0, f"nonrage_{i:04d}.wav"))
    return plan


def generate_corpus(out_dir, n_per_class: int, seed: int,
                    sample_rate: int = 22050, render=None) -> list[dict]:
    """Write WAVs and labels.csv; returns per-file generator parameter logs.

    ``render`` maps work items to (buffer, params) pairs and defaults to a
    serial loop; cmd_synth_corpus passes a thread-pool map. Outputs do not
    depend on the mapping strategy because every file has its own seed.
    """
    if n_per_class < 10:
        raise ValueError("n_per_class must be >= 10")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = corpus_plan(n_per_class)

    def job(item):
        index, label, filename = item
        buf, params = synth_clip(seed, index, label, sample_rate)
        return filename, label, buf, params

    results = list(render(job, plan)) if render else [job(item) for item in plan]

    logs = []
    entries = []
    for filename, label, buf, params in results:
        write_wav(out_dir / filename, buf)
        genre = "synthetic_rage" if label == 1 else "synthetic_nonrage"
        entries.append((filename, label, genre))
        logs.append({"file": filename, "label": label, **params})
    write_labels_csv(entries, out_dir / "labels.csv")
    return logs

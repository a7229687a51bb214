import numpy as np
import pytest

from ragebench.audio import SynthSpec, synth_signal

SR = 22050


@pytest.fixture(scope="session")
def sine_440():
    return synth_signal(SynthSpec("sine", frequency=440.0, duration=2.0), SR)


@pytest.fixture(scope="session")
def sine_440_long():
    return synth_signal(SynthSpec("sine", frequency=440.0, duration=10.0), SR)


@pytest.fixture(scope="session")
def white_noise():
    return synth_signal(SynthSpec("white_noise", seed=7, duration=2.0), SR)


@pytest.fixture(scope="session")
def clicks_120():
    return synth_signal(SynthSpec("click_track", bpm=120.0, duration=30.0, seed=3), SR)


@pytest.fixture(scope="session")
def silence():
    return synth_signal(SynthSpec("silence", duration=2.0), SR)


@pytest.fixture(scope="session")
def blob_table():
    """Separable two-class table: 40 rows x 28 features."""
    rng = np.random.Generator(np.random.PCG64(11))
    neg = rng.normal(0.0, 1.0, size=(20, 28))
    pos = rng.normal(0.0, 1.0, size=(20, 28))
    pos[:, :4] += 3.0
    rows = np.vstack([neg, pos])
    labels = np.array([0] * 20 + [1] * 20)
    return rows, labels

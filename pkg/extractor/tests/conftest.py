import wave
from pathlib import Path

import numpy as np
import pytest


def write_wav(path: Path, duration_s: float, rate: int = 16_000, freq: float = 220.0,
              channels: int = 1, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    t = np.arange(int(duration_s * rate)) / rate
    signal = 0.4 * np.sin(2 * np.pi * freq * t) + 0.05 * rng.standard_normal(len(t))
    pcm = (np.clip(signal, -1, 1) * 32767).astype("<i2")
    if channels == 2:
        pcm = np.column_stack([pcm, pcm]).ravel()
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return path


@pytest.fixture
def wav_factory(tmp_path):
    def make(name, duration_s, **kw):
        return write_wav(tmp_path / name, duration_s, **kw)

    return make

"""WAV loading and resampling to the 16 kHz the encoders expect."""

from __future__ import annotations

import math
import wave
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

TARGET_RATE = 16_000

_PCM_SCALE = {1: 127.0, 2: 32767.0, 4: 2147483647.0}
_PCM_DTYPE = {1: np.int8, 2: "<i2", 4: "<i4"}


class AudioDecodeError(ValueError):
    """File is not decodable PCM WAV audio."""


def load_wav(path) -> tuple[np.ndarray, int]:
    """Mono float samples in [-1, 1] and the file's sample rate."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            rate = fh.getframerate()
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioDecodeError(f"{path}: {exc}") from exc
    if width not in _PCM_DTYPE:
        raise AudioDecodeError(f"{path}: unsupported sample width {width}")
    samples = np.frombuffer(frames, dtype=_PCM_DTYPE[width]).astype(np.float64)
    samples /= _PCM_SCALE[width]
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def to_target_rate(samples: np.ndarray, rate: int) -> np.ndarray:
    if rate == TARGET_RATE:
        return samples
    g = math.gcd(rate, TARGET_RATE)
    return resample_poly(samples, TARGET_RATE // g, rate // g)

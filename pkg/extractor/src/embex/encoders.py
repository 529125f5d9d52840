"""Frame-level encoders: a self-contained log-mel front end plus optional
pretrained speech models.

Every encoder maps 16 kHz samples to (frames, dim) features and reports the
centre time of each frame so windows can pool the right frames. The log-mel
encoder has no model dependencies and is the default; the pretrained ones
(wav2vec2 layer 12, wavlm layer 20, whisper encoder averaged over all layers)
need the optional `models` extra and downloaded weights.
"""

from __future__ import annotations

import numpy as np

from .audio import TARGET_RATE


class EncoderUnavailableError(RuntimeError):
    """Requested encoder needs packages or weights that are not available."""


def _mel_filterbank(n_mels, n_fft, rate, fmin=20.0, fmax=7600.0):
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mel_points) / rate).astype(int)
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        lo, mid, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, mid):
            if mid > lo:
                bank[m - 1, k] = (k - lo) / (mid - lo)
        for k in range(mid, hi):
            if hi > mid:
                bank[m - 1, k] = (hi - k) / (hi - mid)
    return bank


class LogMelEncoder:
    """80-dim log-mel filterbank features, 25 ms window / 10 ms hop."""

    name = "logmel"
    dim = 80

    def __init__(self, n_mels: int = 80):
        self.dim = n_mels
        self._frame = int(0.025 * TARGET_RATE)
        self._hop = int(0.010 * TARGET_RATE)
        self._nfft = 512
        self._bank = _mel_filterbank(n_mels, self._nfft, TARGET_RATE)
        self._window = np.hanning(self._frame)

    def encode(self, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(samples)
        if n < self._frame:
            samples = np.pad(samples, (0, self._frame - n))
            n = len(samples)
        count = 1 + (n - self._frame) // self._hop
        idx = np.arange(self._frame)[None, :] + self._hop * np.arange(count)[:, None]
        frames = samples[idx] * self._window
        spectrum = np.abs(np.fft.rfft(frames, n=self._nfft, axis=1)) ** 2
        feats = np.log(spectrum @ self._bank.T + 1e-10)
        centers = (self._hop * np.arange(count) + self._frame / 2) / TARGET_RATE
        return feats.astype(np.float32), centers


class PretrainedEncoder:
    """Hidden states of a pretrained speech model, one layer or the mean of all."""

    _PRESETS = {
        "wav2vec2": ("facebook/wav2vec2-base", 12),
        "wavlm": ("microsoft/wavlm-large", 20),
        "whisper": ("openai/whisper-base", None),  # None: average all layers
    }

    def __init__(self, kind: str, layer: int | None = None):
        if kind not in self._PRESETS:
            raise ValueError(f"unknown encoder {kind!r}; expected one of {sorted(self._PRESETS)}")
        self.name = kind
        checkpoint, default_layer = self._PRESETS[kind]
        self.layer = default_layer if layer is None else layer
        try:
            import torch  # noqa: F401
            from transformers import AutoFeatureExtractor, AutoModel
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"encoder {kind!r} needs the optional 'models' extra: {exc}"
            ) from exc
        try:
            self._fe = AutoFeatureExtractor.from_pretrained(checkpoint)
            self._model = AutoModel.from_pretrained(checkpoint, output_hidden_states=True)
            self._model.eval()
        except Exception as exc:  # model hub or cache failure
            raise EncoderUnavailableError(f"could not load {checkpoint}: {exc}") from exc

    def encode(self, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        import torch

        inputs = self._fe(samples, sampling_rate=TARGET_RATE, return_tensors="pt")
        with torch.no_grad():
            if self.name == "whisper":
                out = self._model.encoder(inputs["input_features"])
            else:
                out = self._model(**inputs)
        states = out.hidden_states
        if self.layer is None:
            feats = torch.stack(states).mean(dim=0)[0]
        else:
            feats = states[min(self.layer, len(states) - 1)][0]
        feats = feats.numpy()
        duration = len(samples) / TARGET_RATE
        centers = (np.arange(len(feats)) + 0.5) * duration / len(feats)
        return feats.astype(np.float32), centers


def make_encoder(name: str, layer: int | None = None):
    if name == "logmel":
        return LogMelEncoder()
    return PretrainedEncoder(name, layer=layer)

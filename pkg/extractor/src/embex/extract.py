"""Batch extraction: audio files -> window embeddings in SCUTEMB1 files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import TARGET_RATE, load_wav, to_target_rate
from .store import write_clip
from .windows import WindowConfig, window_bounds


@dataclass(frozen=True)
class ExtractorJob:
    audio_paths: tuple[Path, ...]
    output_dir: Path
    encoder_name: str = "logmel"
    layer: int | None = None
    window: WindowConfig = field(default_factory=WindowConfig)
    labels_path: Path | None = None  # JSON: clip_id -> {speaker_id, weak_labels}


@dataclass(frozen=True)
class FileOutcome:
    clip_id: str
    output: Path | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def pool_windows(feats: np.ndarray, centers: np.ndarray, bounds) -> np.ndarray:
    """Mean of the encoder frames whose centre falls inside each window.

    A window too short to contain any frame centre falls back to the single
    nearest frame, so every row is always defined.
    """
    rows = np.empty((len(bounds), feats.shape[1]), dtype=np.float32)
    for i, (start, end) in enumerate(bounds):
        inside = (centers >= start) & (centers < end)
        if inside.any():
            rows[i] = feats[inside].mean(axis=0)
        else:
            rows[i] = feats[np.abs(centers - (start + end) / 2).argmin()]
    return rows


def _load_labels(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def run_job(job: ExtractorJob, encoder=None) -> list[FileOutcome]:
    from .encoders import make_encoder

    if encoder is None:
        encoder = make_encoder(job.encoder_name, layer=job.layer)
    labels = _load_labels(job.labels_path)
    job.output_dir.mkdir(parents=True, exist_ok=True)

    outcomes = []
    for audio_path in job.audio_paths:
        clip_id = Path(audio_path).stem
        try:
            samples, rate = load_wav(audio_path)
            samples = to_target_rate(samples, rate)
            duration = len(samples) / TARGET_RATE
            bounds = window_bounds(duration, job.window)  # raises when too short
            feats, centers = encoder.encode(samples)
            matrix = pool_windows(feats, centers, bounds)
            meta = labels.get(clip_id, {})
            out_path = job.output_dir / f"{clip_id}.emb"
            write_clip(
                out_path,
                matrix,
                clip_id=clip_id,
                speaker_id=meta.get("speaker_id", "spk000"),
                duration_s=duration,
                length_s=job.window.length_s,
                stride_s=job.window.stride_s,
                weak_labels=meta.get("weak_labels", ()),
            )
            outcomes.append(FileOutcome(clip_id, out_path))
        except Exception as exc:  # per-file isolation; the caller sums failures
            outcomes.append(FileOutcome(clip_id, None, error=str(exc)))
    return outcomes

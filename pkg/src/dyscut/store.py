"""On-disk interchange format for window embeddings and clip manifests.

Embedding files carry the magic "SCUTEMB1", two little-endian uint32 fields
(rows, dim), then rows*dim little-endian float32 values in row-major order.
The clip manifest travels as a JSON sidecar with the same basename and a
".manifest" suffix. Strong labels (ground-truth segments) live only in the
manifest so the core pipeline can never consume them by accident.

Any extractor that writes this format byte for byte can feed the pipeline.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .segments import Segment
from .windows import WindowConfig, window_count

EMBEDDING_MAGIC = b"SCUTEMB1"
_HEADER = struct.Struct("<II")

INDEX_FILENAME = "index.json"


class EmbeddingFormatError(ValueError):
    """File is not an embedding file (bad magic or malformed structure)."""


class EmbeddingTruncatedError(ValueError):
    """Embedding payload ends before rows*dim values."""


class EmbeddingValueError(ValueError):
    """Embedding payload contains NaN or Inf."""


class ManifestError(ValueError):
    """Manifest sidecar is missing or malformed."""


@dataclass(frozen=True)
class ClipManifest:
    """Everything known about one clip except the embeddings themselves."""

    clip_id: str
    speaker_id: str
    duration_s: float
    window_config: WindowConfig
    weak_labels: tuple[str, ...] = ()
    gt_segments: tuple[Segment, ...] | None = None

    def __post_init__(self):
        if not self.clip_id:
            raise ValueError("clip_id must be non-empty")
        object.__setattr__(self, "weak_labels", tuple(sorted(set(self.weak_labels))))
        if self.gt_segments is not None:
            object.__setattr__(self, "gt_segments", tuple(self.gt_segments))

    def window_count(self) -> int:
        return window_count(self.duration_s, self.window_config)


def manifest_path(path) -> Path:
    return Path(path).with_suffix(".manifest")


def _manifest_to_dict(m: ClipManifest) -> dict:
    return {
        "clip_id": m.clip_id,
        "speaker_id": m.speaker_id,
        "duration_s": m.duration_s,
        "window": {"length_s": m.window_config.length_s, "stride_s": m.window_config.stride_s},
        "weak_labels": list(m.weak_labels),
        "gt_segments": None
        if m.gt_segments is None
        else [{"start_s": s.start_s, "end_s": s.end_s, "label": s.label} for s in m.gt_segments],
    }


def _manifest_from_dict(d: dict) -> ClipManifest:
    try:
        gt = d["gt_segments"]
        return ClipManifest(
            clip_id=d["clip_id"],
            speaker_id=d["speaker_id"],
            duration_s=float(d["duration_s"]),
            window_config=WindowConfig(
                length_s=float(d["window"]["length_s"]),
                stride_s=float(d["window"]["stride_s"]),
            ),
            weak_labels=tuple(d["weak_labels"]),
            gt_segments=None
            if gt is None
            else tuple(Segment(s["start_s"], s["end_s"], s["label"]) for s in gt),
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc


def write_embeddings(matrix, manifest: ClipManifest, path) -> None:
    """Write one clip's embedding matrix and its manifest sidecar.

    The row count must equal the window count implied by the manifest's
    duration and window configuration.
    """
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"embedding matrix must be 2-D with rows >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingValueError("embedding matrix contains NaN or Inf")
    expected = manifest.window_count()
    if arr.shape[0] != expected:
        raise ValueError(
            f"matrix has {arr.shape[0]} rows but the manifest implies {expected} windows"
        )
    path = Path(path)
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with path.open("wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(_HEADER.pack(arr.shape[0], arr.shape[1]))
        fh.write(payload.tobytes())
    manifest_path(path).write_text(
        json.dumps(_manifest_to_dict(manifest), indent=1), encoding="utf-8"
    )


def read_embeddings(path) -> tuple[np.ndarray, ClipManifest]:
    """Read a clip back; validates structure, finiteness, and window count."""
    path = Path(path)
    blob = path.read_bytes()
    head = len(EMBEDDING_MAGIC) + _HEADER.size
    if len(blob) < head or blob[: len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
        raise EmbeddingFormatError(f"{path} is not an embedding file")
    rows, dim = _HEADER.unpack_from(blob, len(EMBEDDING_MAGIC))
    if rows < 1 or dim < 1:
        raise EmbeddingFormatError(f"{path}: invalid shape ({rows}, {dim})")
    expected = head + 4 * rows * dim
    if len(blob) < expected:
        raise EmbeddingTruncatedError(
            f"{path}: payload truncated, expected {expected} bytes, found {len(blob)}"
        )
    if len(blob) > expected:
        raise EmbeddingFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    matrix = np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=head).reshape(rows, dim)
    if not np.all(np.isfinite(matrix)):
        raise EmbeddingValueError(f"{path}: embedding payload contains NaN or Inf")

    mpath = manifest_path(path)
    if not mpath.exists():
        raise ManifestError(f"manifest sidecar {mpath} not found")
    try:
        manifest = _manifest_from_dict(json.loads(mpath.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{mpath}: invalid JSON: {exc}") from exc
    if rows != manifest.window_count():
        raise ManifestError(
            f"{path}: {rows} rows but manifest implies {manifest.window_count()} windows"
        )
    return matrix, manifest


@dataclass(frozen=True)
class CorpusIndex:
    """Directory-level catalogue: clips, their files, speakers, and splits."""

    classes: tuple[str, ...]
    clips: tuple[dict, ...]  # each: clip_id, speaker_id, split, file

    def clip_ids(self, split: str | None = None) -> list[str]:
        return [c["clip_id"] for c in self.clips if split in (None, "all", c["split"])]

    def entries(self, split: str | None = None) -> list[dict]:
        return [c for c in self.clips if split in (None, "all", c["split"])]

    def speakers(self, split: str | None = None) -> list[str]:
        return sorted({c["speaker_id"] for c in self.entries(split)})


def write_corpus_index(directory, classes: Sequence[str], clips: Iterable[dict]) -> None:
    doc = {"classes": list(classes), "clips": list(clips)}
    (Path(directory) / INDEX_FILENAME).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def read_corpus_index(directory) -> CorpusIndex:
    path = Path(directory) / INDEX_FILENAME
    if not path.exists():
        raise ManifestError(f"no corpus index at {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    try:
        return CorpusIndex(classes=tuple(doc["classes"]), clips=tuple(doc["clips"]))
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"malformed corpus index {path}: {exc}") from exc


def read_corpus_clip(directory, entry: dict) -> tuple[np.ndarray, ClipManifest]:
    return read_embeddings(Path(directory) / entry["file"])

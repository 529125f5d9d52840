"""Writer for the SCUTEMB1 interchange format.

Independent implementation of the wire contract the segmentation pipeline
reads: magic "SCUTEMB1", little-endian uint32 rows and dim, float32 row-major
payload, plus a JSON manifest sidecar named after the same basename.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SCUTEMB1"
_HEADER = struct.Struct("<II")


def write_clip(
    path,
    matrix: np.ndarray,
    *,
    clip_id: str,
    speaker_id: str,
    duration_s: float,
    length_s: float,
    stride_s: float,
    weak_labels=(),
    gt_segments=None,
) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"embedding matrix must be 2-D with rows, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding matrix contains NaN or Inf")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())
    manifest = {
        "clip_id": clip_id,
        "speaker_id": speaker_id,
        "duration_s": duration_s,
        "window": {"length_s": length_s, "stride_s": stride_s},
        "weak_labels": sorted(set(weak_labels)),
        "gt_segments": gt_segments,
    }
    path.with_suffix(".manifest").write_text(
        json.dumps(manifest, indent=1), encoding="utf-8"
    )

"""Time segments and boundary extraction from per-window labels.

Consecutive dysfluent windows are merged into one segment spanning from the
earliest window start to the latest window end. Gaps no longer than eta are
then bridged, and segments no longer than eta are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .windows import WindowConfig

UNTYPED_LABEL = "dysfluent"


@dataclass(frozen=True)
class Segment:
    """A labeled time interval [start_s, end_s)."""

    start_s: float
    end_s: float
    label: str = UNTYPED_LABEL

    def __post_init__(self):
        if not (np.isfinite(self.start_s) and np.isfinite(self.end_s)):
            raise ValueError(f"segment bounds must be finite, got [{self.start_s}, {self.end_s}]")
        if not (0.0 <= self.start_s < self.end_s):
            raise ValueError(
                f"segment must satisfy 0 <= start < end, got [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class BoundaryConfig:
    """Boundary extraction settings.

    eta_s is both the longest gap that gets merged and the longest segment
    that gets discarded. merge_before_filter controls the order of the two
    clean-up passes (merge-then-filter by default).
    """

    eta_s: float = 0.2
    merge_before_filter: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.eta_s) and self.eta_s >= 0):
            raise ValueError(f"eta must be >= 0 seconds, got {self.eta_s}")


def _runs_to_spans(labels: np.ndarray, wcfg: WindowConfig) -> list[tuple[float, float]]:
    spans = []
    n = len(labels)
    i = 0
    while i < n:
        if labels[i]:
            j = i
            while j + 1 < n and labels[j + 1]:
                j += 1
            spans.append((i * wcfg.stride_s, j * wcfg.stride_s + wcfg.length_s))
            i = j + 1
        else:
            i += 1
    return spans


def _merge_gaps(spans: list[tuple[float, float]], eta_s: float) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for start, end in spans:
        if merged and start - merged[-1][1] <= eta_s:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def extract_segments(
    window_labels: Sequence[bool] | np.ndarray,
    wcfg: WindowConfig,
    bcfg: BoundaryConfig = BoundaryConfig(),
) -> list[Segment]:
    """Convert per-window dysfluent flags into sorted, disjoint time segments."""
    labels = np.asarray(window_labels, dtype=bool)
    if labels.ndim != 1:
        raise ValueError(f"window labels must be 1-D, got shape {labels.shape}")
    spans = _runs_to_spans(labels, wcfg)
    if bcfg.merge_before_filter:
        spans = _merge_gaps(spans, bcfg.eta_s)
        spans = [s for s in spans if s[1] - s[0] > bcfg.eta_s]
    else:
        spans = [s for s in spans if s[1] - s[0] > bcfg.eta_s]
        spans = _merge_gaps(spans, bcfg.eta_s)
    return [Segment(start, end) for start, end in spans]


def label_segments(
    segments: Iterable[Segment],
    window_labels: np.ndarray,
    window_top_class: np.ndarray,
    class_names: Sequence[str],
    wcfg: WindowConfig,
) -> list[Segment]:
    """Attach a dysfluency class to each segment by majority vote.

    The vote runs over the dysfluent windows that overlap the segment, using
    each window's highest-probability dysfluent class. Ties resolve to the
    lowest class index.
    """
    labels = np.asarray(window_labels, dtype=bool)
    top = np.asarray(window_top_class, dtype=int)
    starts = np.arange(len(labels)) * wcfg.stride_s
    ends = starts + wcfg.length_s
    typed = []
    for seg in segments:
        member = labels & (starts < seg.end_s) & (ends > seg.start_s)
        if member.any():
            votes = np.bincount(top[member], minlength=len(class_names))
            cls = class_names[int(np.argmax(votes))]
        else:
            cls = UNTYPED_LABEL
        typed.append(Segment(seg.start_s, seg.end_s, cls))
    return typed


def write_segment_records(path, records: Iterable[tuple[str, Segment]]) -> None:
    """Write segments as tab-separated records: clip_id, start, end, label.

    Times are fixed-point with three decimals. Records are written in the
    order given; callers sort for determinism.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for clip_id, seg in records:
            fh.write(f"{clip_id}\t{seg.start_s:.3f}\t{seg.end_s:.3f}\t{seg.label}\n")


def read_segment_records(path) -> dict[str, list[Segment]]:
    """Read a segment record file back into a clip_id -> segments mapping."""
    out: dict[str, list[Segment]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            clip_id, start, end, label = fields
            out.setdefault(clip_id, []).append(Segment(float(start), float(end), label))
    return out

"""Utterance windowing: fixed-length overlapping analysis windows.

Window bounds are always computed from the window index so that repeated
runs (and independent reimplementations) produce bit-identical times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# One nanosecond of slack when counting windows; absorbs float representation
# error in duration/stride ratios without ever adding a window that does not fit.
_COUNT_EPS_S = 1e-9


@dataclass(frozen=True)
class WindowConfig:
    """Length and stride of the sliding analysis window, in seconds."""

    length_s: float = 0.75
    stride_s: float = 0.1

    def __post_init__(self):
        if not (self.length_s > 0):
            raise ValueError(f"window length must be positive, got {self.length_s}")
        if not (0 < self.stride_s <= self.length_s):
            raise ValueError(
                f"stride must lie in (0, length]; got stride={self.stride_s}, "
                f"length={self.length_s}"
            )


@dataclass(frozen=True)
class WindowSet:
    """The ordered windows covering one utterance."""

    bounds: np.ndarray = field(repr=False)  # (count, 2) start/end seconds

    @property
    def count(self) -> int:
        return int(self.bounds.shape[0])

    @property
    def starts(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def ends(self) -> np.ndarray:
        return self.bounds[:, 1]


def window_count(duration_s: float, cfg: WindowConfig) -> int:
    """Number of full windows that fit in an utterance of the given duration."""
    if not np.isfinite(duration_s) or duration_s < cfg.length_s:
        raise ValueError(
            f"utterance of {duration_s} s is shorter than one window "
            f"({cfg.length_s} s) and cannot be processed"
        )
    return int(math.floor((duration_s - cfg.length_s) / cfg.stride_s + _COUNT_EPS_S)) + 1


def make_windows(duration_s: float, cfg: WindowConfig) -> WindowSet:
    """Divide an utterance into overlapping windows.

    Window i starts at i * stride and ends at start + length (capped at the
    utterance end). A trailing remainder shorter than one stride is left
    uncovered so every window has the same length.
    """
    n = window_count(duration_s, cfg)
    idx = np.arange(n, dtype=np.float64)
    starts = idx * cfg.stride_s
    ends = np.minimum(starts + cfg.length_s, duration_s)
    bounds = np.column_stack([starts, ends])
    bounds.flags.writeable = False
    return WindowSet(bounds=bounds)

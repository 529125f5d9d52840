"""Analysis-window arithmetic, kept bit-compatible with the consumer pipeline.

The segmentation pipeline expects one embedding row per window where window i
starts at exactly i * stride and runs for one window length; the number of
windows is floor((duration - length) / stride) + 1 with a nanosecond of slack
for float representation. Both suites check the same vector file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_COUNT_EPS_S = 1e-9


@dataclass(frozen=True)
class WindowConfig:
    length_s: float = 0.75
    stride_s: float = 0.1

    def __post_init__(self):
        if not (self.length_s > 0 and 0 < self.stride_s <= self.length_s):
            raise ValueError(
                f"need 0 < stride <= length, got stride={self.stride_s}, length={self.length_s}"
            )


def window_count(duration_s: float, cfg: WindowConfig) -> int:
    if duration_s < cfg.length_s:
        raise ValueError(
            f"clip of {duration_s:.3f}s is shorter than one {cfg.length_s}s window"
        )
    return int(math.floor((duration_s - cfg.length_s) / cfg.stride_s + _COUNT_EPS_S)) + 1


def window_bounds(duration_s: float, cfg: WindowConfig) -> list[tuple[float, float]]:
    n = window_count(duration_s, cfg)
    return [
        (i * cfg.stride_s, min(i * cfg.stride_s + cfg.length_s, duration_s))
        for i in range(n)
    ]

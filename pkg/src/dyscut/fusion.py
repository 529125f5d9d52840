"""Fusing classifier knowledge into the embedding graph.

The refined graph blends, per node i, the raw embedding similarities with
the rows of the product of the embedding graph and the prediction graph,
weighted by a per-node confidence mask M[i]:

    raw[i, j] = (1 - M[i]) * w1[i, j] + M[i] * B[i, j]

where B is w1 @ w2 rescaled so its largest entry is 1 (the product's rows
grow with node count, so rescaling keeps the two blended terms on the same
scale). The blend is row-weighted and therefore asymmetric; the output is
symmetrized because the cut operates on an undirected graph. A floor then
replaces every entry below tau with a small positive value, which keeps the
graph connected while removing weak connections' influence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_square, check_symmetric, check_unit_interval


@dataclass(frozen=True)
class FusionConfig:
    """Similarity threshold tau and the value weak edges are floored to."""

    tau: float = 0.25
    floor_value: float = 1e-5

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if not (0.0 < self.floor_value < self.tau):
            raise ValueError(
                f"floor value must satisfy 0 < floor < tau, got floor={self.floor_value}, "
                f"tau={self.tau}"
            )


def fuse_similarities(
    w1,
    w2,
    mask,
    *,
    normalize_product: bool = True,
    symmetrize: bool = True,
) -> np.ndarray:
    """Blend the embedding graph with classifier-derived similarities.

    With mask all zeros the result is w1, bit for bit. With mask all ones it
    is the symmetrized, max-normalized product w1 @ w2. The two keyword
    switches exist for sensitivity checks only and default to the pipeline
    behaviour.
    """
    a = check_symmetric(w1, name="w1")
    b = check_symmetric(w2, name="w2")
    if a.shape != b.shape:
        raise ValueError(f"w1 and w2 shapes differ: {a.shape} vs {b.shape}")
    m = check_unit_interval(mask, name="mask")
    if m.shape != (a.shape[0],):
        raise ValueError(f"mask must have shape ({a.shape[0]},), got {m.shape}")

    prod = a @ b
    if normalize_product:
        top = prod.max() if prod.size else 0.0
        if top > 0.0:
            prod = prod / top
    raw = (1.0 - m)[:, None] * a + m[:, None] * prod
    if symmetrize:
        return (raw + raw.T) / 2.0
    return raw


def apply_similarity_floor(w, cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    """Replace entries below tau with the floor value; leave the rest unchanged."""
    a = check_square(w, name="similarity matrix")
    return np.where(a < cfg.tau, cfg.floor_value, a)

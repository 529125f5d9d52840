"""Embedding similarity graph: cosine edge weights between window nodes."""

from __future__ import annotations

import numpy as np

from .validation import check_embeddings


def cosine_similarity_matrix(embeddings) -> np.ndarray:
    """Fully connected cosine-similarity matrix over window embeddings.

    Entries are clamped to [-1, 1]; negative similarities are kept (the
    fusion floor enforces non-negativity later). The upper triangle is
    computed and mirrored so the result is symmetric bit for bit, and the
    diagonal is each node's self-similarity, exactly 1.
    """
    x = check_embeddings(embeddings)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"embedding row {zero[0]} has zero norm; cosine is undefined")
    unit = x / norms[:, None]
    w = unit @ unit.T
    np.clip(w, -1.0, 1.0, out=w)
    upper = np.triu(w, 1)
    w = upper + upper.T
    np.fill_diagonal(w, 1.0)
    return w

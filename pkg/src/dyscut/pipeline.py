"""Per-clip segmentation pipeline and its estimator facade.

One clip flows through: cosine graph over window embeddings, stochastic
classifier predictions per window, variant-dependent graph refinement,
two-way partition, dysfluent-side identification, and boundary extraction.

Variants:
  full         entropy-mask-weighted classifier guidance
  prob_mask    probability-thresholded mask instead of the entropy mask
  no_mask      classifier guidance applied everywhere (mask of ones)
  pure_ncut    no classifier guidance; floored cosine graph only
  kmeans       k-means bipartition of the embeddings (no spectral step)
  fuzzy_cmeans fuzzy c-means bipartition (no spectral step)

Every variant still consults the classifier to decide which side of the
partition is the dysfluent one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .clustering import fuzzy_cmeans_bipartition, kmeans_bipartition
from .fusion import FusionConfig, apply_similarity_floor, fuse_similarities
from .graph import cosine_similarity_matrix
from .oracle import (
    OracleModel,
    WindowOracle,
    dysfluent_flags,
    entropy_mask_vector,
    mc_predict,
    p_dysfluent_max_vector,
    p_fluent_vector,
    prediction_similarity_matrix,
    probability_mask,
    top_dysfluent_classes,
)
from .segments import BoundaryConfig, Segment, extract_segments, label_segments
from .spectral import Partition, fiedler_solution, identify_dysfluent_cluster, threshold_partition
from .store import ClipManifest
from .validation import check_embeddings
from .windows import WindowConfig

VARIANTS = ("full", "prob_mask", "no_mask", "pure_ncut", "kmeans", "fuzzy_cmeans")
PHI_MODES = ("sign", "mean")
SPECTRAL_VARIANTS = ("full", "prob_mask", "no_mask", "pure_ncut")


@dataclass(frozen=True)
class ClipResult:
    """Window labels, typed segments, and (optionally) every intermediate."""

    window_labels: np.ndarray = field(repr=False)
    segments: list[Segment] = field(default_factory=list)
    partition: Partition | None = None
    aux: dict = field(default_factory=dict, repr=False)


def clip_rng(seed: int, clip_id: str) -> np.random.Generator:
    """Independent, order-free generator for one clip."""
    import zlib

    return np.random.default_rng([seed, zlib.crc32(clip_id.encode("utf-8"))])


def segment_clip(
    embeddings,
    model: OracleModel,
    *,
    rng: np.random.Generator,
    window_config: WindowConfig = WindowConfig(),
    class_names: Sequence[str],
    variant: str = "full",
    tau: float = 0.25,
    floor_value: float = 1e-5,
    eta_s: float = 0.2,
    merge_before_filter: bool = True,
    phi_mode: str = "sign",
    mc_passes: int = 100,
    entropy_support: str = "all",
    eig_method: str = "auto",
    collect_aux: bool = False,
) -> ClipResult:
    """Segment one clip's window embeddings into typed dysfluent intervals."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    x = check_embeddings(embeddings)
    preds = mc_predict(model, x, mc_passes, rng, entropy_support=entropy_support)
    flags = dysfluent_flags(preds)
    pmax = p_dysfluent_max_vector(preds)
    aux: dict = {}
    if collect_aux:
        aux["mean_probs"] = np.stack([p.mean_probs for p in preds])
        aux["flags"] = flags

    if variant in SPECTRAL_VARIANTS:
        w1 = cosine_similarity_matrix(x)
        fcfg = FusionConfig(tau=tau, floor_value=floor_value)
        if variant == "pure_ncut":
            w_tilde = apply_similarity_floor(w1, fcfg)
        else:
            w2 = prediction_similarity_matrix((p_fluent_vector(preds), pmax))
            if variant == "full":
                mask = entropy_mask_vector(preds)
            elif variant == "prob_mask":
                mask = probability_mask(preds)
            else:  # no_mask: guidance everywhere
                mask = np.ones(len(x))
            w_tilde = apply_similarity_floor(fuse_similarities(w1, w2, mask), fcfg)
            if collect_aux:
                aux["w2"] = w2
                aux["mask"] = mask
        solution = fiedler_solution(w_tilde, method=eig_method)
        partition = threshold_partition(solution, mode=phi_mode)
        if collect_aux:
            aux["w1"] = w1
            aux["w_tilde"] = w_tilde
            aux["y1"] = solution.y1
            aux["eigenvalues"] = solution.eigenvalues
    else:
        assignment = (
            kmeans_bipartition(x, seed=rng)
            if variant == "kmeans"
            else fuzzy_cmeans_bipartition(x, seed=rng)
        )
        partition = Partition(labels=assignment.labels, threshold_mode=None)

    partition = identify_dysfluent_cluster(partition, flags, p_dysfluent_max=pmax)
    labels = partition.dysfluent_window_mask()
    bcfg = BoundaryConfig(eta_s=eta_s, merge_before_filter=merge_before_filter)
    segments = extract_segments(labels, window_config, bcfg)
    segments = label_segments(
        segments, labels, top_dysfluent_classes(preds), class_names, window_config
    )
    return ClipResult(window_labels=labels, segments=segments, partition=partition, aux=aux)


def weak_label_targets(manifest: ClipManifest, class_names: Sequence[str], n_windows: int) -> np.ndarray:
    """Per-window multilabel targets from the clip's weak labels.

    Every window inherits the full clip-level label set (the intended
    multiple-instance noise of weak supervision). Output column 0 is the
    fluent class, set only when the clip carries no dysfluency label.
    """
    target = np.zeros(len(class_names) + 1)
    if not manifest.weak_labels:
        target[0] = 1.0
    for cls in manifest.weak_labels:
        try:
            target[1 + list(class_names).index(cls)] = 1.0
        except ValueError:
            raise ValueError(
                f"clip {manifest.clip_id} carries unknown weak label {cls!r}"
            ) from None
    return np.tile(target, (n_windows, 1))


class DysfluencySegmenter(BaseEstimator):
    """Estimator facade over segment_clip.

    Holds a fitted WindowOracle (or a raw OracleModel) plus the pipeline
    hyperparameters; predict returns per-window dysfluent flags and segment
    returns typed time intervals.
    """

    def __init__(
        self,
        oracle=None,
        class_names: Sequence[str] | None = None,
        window_length_s: float = 0.75,
        window_stride_s: float = 0.1,
        variant: str = "full",
        tau: float = 0.25,
        floor_value: float = 1e-5,
        eta_s: float = 0.2,
        merge_before_filter: bool = True,
        phi_mode: str = "sign",
        mc_passes: int = 100,
        entropy_support: str = "all",
        random_state: int = 0,
    ):
        self.oracle = oracle
        self.class_names = class_names
        self.window_length_s = window_length_s
        self.window_stride_s = window_stride_s
        self.variant = variant
        self.tau = tau
        self.floor_value = floor_value
        self.eta_s = eta_s
        self.merge_before_filter = merge_before_filter
        self.phi_mode = phi_mode
        self.mc_passes = mc_passes
        self.entropy_support = entropy_support
        self.random_state = random_state

    def _model(self) -> OracleModel:
        if isinstance(self.oracle, OracleModel):
            return self.oracle
        if isinstance(self.oracle, WindowOracle):
            return self.oracle.model_
        raise ValueError("oracle must be an OracleModel or a fitted WindowOracle")

    def _class_names(self) -> Sequence[str]:
        if self.class_names is not None:
            return self.class_names
        return [f"class{i}" for i in range(self._model().class_count - 1)]

    def fit(self, X=None, y=None):
        self._model()  # validates the oracle is usable
        return self

    def _run(self, X, clip_id: str, collect_aux: bool) -> ClipResult:
        return segment_clip(
            X,
            self._model(),
            rng=clip_rng(self.random_state, clip_id),
            window_config=WindowConfig(self.window_length_s, self.window_stride_s),
            class_names=self._class_names(),
            variant=self.variant,
            tau=self.tau,
            floor_value=self.floor_value,
            eta_s=self.eta_s,
            merge_before_filter=self.merge_before_filter,
            phi_mode=self.phi_mode,
            mc_passes=self.mc_passes,
            entropy_support=self.entropy_support,
            collect_aux=collect_aux,
        )

    def predict(self, X, clip_id: str = "clip") -> np.ndarray:
        """Boolean per-window dysfluent labels for one clip's embeddings."""
        return self._run(X, clip_id, collect_aux=False).window_labels

    def segment(self, X, clip_id: str = "clip", collect_aux: bool = False) -> ClipResult:
        """Full result for one clip: labels, typed segments, optional intermediates."""
        return self._run(X, clip_id, collect_aux=collect_aux)

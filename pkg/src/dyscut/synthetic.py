"""Desk-scale synthetic corpus: window embeddings, weak labels, ground truth.

Clips are generated directly in embedding space. Each speaker gets a private
translation of a fixed mean layout: one fluent mean, and one mean per
dysfluency class placed so that every class mean sits exactly
cluster_separation * noise_sigma away from the fluent mean (class means sit
closer to each other than to the fluent mean, as dysfluent speech variants
do in real embedding spaces). Windows overlapping a ground-truth segment mix
the fluent and class means proportionally to overlap, then isotropic
Gaussian noise is added.

Everything is deterministic per seed; clips regenerate from fresh seeded
draws when segment placement is infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .segments import Segment
from .store import ClipManifest, write_corpus_index, write_embeddings
from .windows import WindowConfig, make_windows

DEFAULT_CLASS_NAMES = ("prolongation", "repetition", "interjection", "block")

# Observed duration ranges (seconds) per dysfluency class in real clips.
CLASS_DURATION_RANGES = {
    "prolongation": (0.41, 3.95),
    "repetition": (0.20, 4.99),
    "interjection": (0.12, 1.88),
    "block": (0.23, 4.20),
}
_FALLBACK_DURATION_RANGE = (0.20, 3.00)

# Mean-layout geometry. The layout targets the cosine statistics real
# encoder embeddings show: fluent windows mutually similar, dysfluent
# windows mutually similar but looser (they are acoustically more
# heterogeneous), and fluent/dysfluent pairs near orthogonal once clusters
# are far apart. Cluster coherence falls off steeply as separability
# shrinks (an encoder that can barely separate classes is also locally
# inconsistent), with the reference cosines below holding at a separation
# of six sigmas. Class offsets fan
# the dysfluent means out so classes sit a full separation from each other
# (classes must stay as distinguishable as dysfluent is from fluent, or
# per-class weak labels carry no information) while every class mean stays
# exactly one separation from the fluent mean.
_FLUENT_COS = 0.88
_DYSFLUENT_COS = 0.52
_REFERENCE_SEPARATION = 6.0
_OFFSET_FACTOR = np.sqrt(2.0) / 2.0  # of one separation
_SPEAKER_JITTER_SIGMA = 0.15  # speaker translation scale, in noise sigmas
# Dysfluency severity varies by person: each speaker's effective separation
# is the configured one scaled by a draw from this range.
_SPEAKER_SEVERITY_RANGE = (0.8, 1.2)
# Per-window energy factor applied to the whole embedding vector: norms vary
# with speech energy while directions carry content, so cosine similarities
# are untouched but the clusters are far from spherical in euclidean space.
_ENERGY_JITTER = 0.3

_SEGMENT_GAP_S = 1.8  # minimum space between ground-truth segments
_EDGE_GAP_S = 0.1
_MAX_DURATION_FRACTION = 0.5
_COVERAGE_RANGE_WHEN_DYSFLUENT = (0.48, 0.62)
_MEAN_COVERAGE_WHEN_DYSFLUENT = 0.55
_COVERAGE_TOLERANCE = 0.85  # a clip may stop this short of its target
_PLACEMENT_TRIES = 50
_CLIP_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic corpus generator."""

    clip_count: int = 50
    clip_duration_s: float = 5.0
    embedding_dim: int = 16
    class_count: int = 4
    cluster_separation: float = 6.0
    noise_sigma: float = 1.0
    dysfluency_rate: float = 0.25
    speakers: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.clip_count < 1:
            raise ValueError("need at least one clip")
        if self.cluster_separation < 0:
            raise ValueError(f"cluster separation must be >= 0, got {self.cluster_separation}")
        if not (0.0 < self.dysfluency_rate < 1.0):
            raise ValueError(f"dysfluency rate must lie in (0, 1), got {self.dysfluency_rate}")
        if self.speakers < 2:
            raise ValueError(f"need at least two speakers for disjoint splits, got {self.speakers}")
        if self.class_count < 1:
            raise ValueError("need at least one dysfluency class")
        if self.embedding_dim < self.class_count + 2:
            raise ValueError(
                f"embedding dim must be >= class_count + 2 "
                f"({self.class_count + 2}), got {self.embedding_dim}"
            )
        if self.noise_sigma <= 0:
            raise ValueError(f"noise sigma must be positive, got {self.noise_sigma}")

    @property
    def class_names(self) -> tuple[str, ...]:
        if self.class_count <= len(DEFAULT_CLASS_NAMES):
            return DEFAULT_CLASS_NAMES[: self.class_count]
        extras = tuple(
            f"class{i}" for i in range(len(DEFAULT_CLASS_NAMES), self.class_count)
        )
        return DEFAULT_CLASS_NAMES + extras


def _class_means(cfg: SynthConfig, severity: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Fluent mean and (class_count, dim) class means in the fixed layout.

    Mean norms follow from the target cosines and the isotropic noise power
    of the embedding dimension; the angle between the fluent mean and the
    dysfluent centre then follows from the separation constraint, with the
    colinear limits handled so the fluent-to-class distance is always exactly
    one separation (in particular, zero separation collapses all means).
    Severity rescales one speaker's whole layout: subtler dysfluencies mean
    both closer means and less coherent clusters.
    """
    noise_power = cfg.embedding_dim * cfg.noise_sigma**2
    sep = cfg.cluster_separation * cfg.noise_sigma * severity
    offset = _OFFSET_FACTOR * sep
    # distance between the fluent mean and the centre of the dysfluent fan
    chord = np.sqrt(sep**2 - offset**2)

    tightness = (cfg.cluster_separation * severity / _REFERENCE_SEPARATION) ** 2
    r_fluent = np.sqrt(_FLUENT_COS / (1.0 - _FLUENT_COS) * noise_power * tightness)
    dys_norm_sq = _DYSFLUENT_COS / (1.0 - _DYSFLUENT_COS) * noise_power * tightness
    r_dys = np.sqrt(max(dys_norm_sq - offset**2, 0.0))

    if r_dys <= abs(r_fluent - chord) or chord >= r_fluent + r_dys:
        # Triangle infeasible: place the dysfluent centre on the fluent axis.
        r_dys = abs(r_fluent - chord) if chord <= r_fluent else chord - r_fluent
        cos_angle = 1.0 if chord <= r_fluent else -1.0
    else:
        cos_angle = (r_fluent**2 + r_dys**2 - chord**2) / (2.0 * r_fluent * r_dys)
    cos_angle = float(np.clip(cos_angle, -1.0, 1.0))

    fluent = np.zeros(cfg.embedding_dim)
    fluent[0] = r_fluent
    means = np.zeros((cfg.class_count, cfg.embedding_dim))
    means[:, 0] = r_dys * cos_angle
    means[:, 1] = r_dys * np.sqrt(1.0 - cos_angle**2)
    for c in range(cfg.class_count):
        means[c, 2 + c] = offset
    return fluent, means


def _draw_duration(rng: np.random.Generator, class_name: str, clip_duration: float) -> float:
    """Duration draw over the class range, weighted toward the middle.

    The range endpoints are observed extremes; typical episodes cluster well
    away from them, so the draw is Beta(3, 3) shaped rather than uniform
    (a uniform draw would flood the corpus with events far shorter than one
    analysis window).
    """
    lo, hi = CLASS_DURATION_RANGES.get(class_name, _FALLBACK_DURATION_RANGE)
    hi = min(hi, _MAX_DURATION_FRACTION * clip_duration)
    if hi <= lo:
        return lo
    return float(lo + (hi - lo) * rng.beta(2.5, 1.5))


def _place_segments(
    rng: np.random.Generator,
    cfg: SynthConfig,
    coverage_target: float,
    class_cycle: "_ClassCycle",
) -> list[Segment] | None:
    """Place up to three disjoint segments until the coverage target is met.

    A dysfluent clip gets one long episode, two medium ones, or three short
    ones depending on the class duration draws. None when a draw does not
    fit (the caller then regenerates the clip from fresh draws).
    """
    # All of a clip's episodes share one class: dysfluency type is a fairly
    # stable per-utterance trait, and single-type clips keep the multilabel
    # targets free of within-clip class cross-talk.
    cls = class_cycle.peek(0)
    placed: list[Segment] = []
    covered = 0.0
    while covered < _COVERAGE_TOLERANCE * coverage_target * cfg.clip_duration_s and len(placed) < 3:
        dur = _draw_duration(rng, cls, cfg.clip_duration_s)
        lo = _EDGE_GAP_S
        hi = cfg.clip_duration_s - _EDGE_GAP_S - dur
        if hi <= lo:
            return None
        for _ in range(_PLACEMENT_TRIES):
            start = float(rng.uniform(lo, hi))
            candidate = Segment(start, start + dur, cls)
            if all(
                candidate.start_s >= s.end_s + _SEGMENT_GAP_S
                or candidate.end_s <= s.start_s - _SEGMENT_GAP_S
                for s in placed
            ):
                placed.append(candidate)
                covered += dur
                break
        else:
            return None
    return sorted(placed, key=lambda s: s.start_s)


class _ClassCycle:
    """Deals classes out in shuffled rounds so corpus class counts stay balanced.

    Segment placement can be retried many times per clip, so consumption is
    explicit: peek(k) previews the next classes, advance(n) commits them once
    a clip's placement succeeds.
    """

    def __init__(self, class_names: tuple[str, ...], rng: np.random.Generator):
        self._names = class_names
        self._rng = rng
        self._queue: list[str] = []

    def _fill(self, upto: int) -> None:
        while len(self._queue) <= upto:
            self._queue.extend(self._rng.permutation(self._names))

    def peek(self, k: int) -> str:
        self._fill(k)
        return self._queue[k]

    def advance(self, n: int) -> None:
        self._fill(n)
        del self._queue[:n]


def _window_mixture(
    windows, segments: list[Segment], class_names: tuple[str, ...]
) -> np.ndarray:
    """(n_windows, class_count) overlap fraction of each window with each class."""
    frac = np.zeros((windows.count, len(class_names)))
    index = {name: i for i, name in enumerate(class_names)}
    for seg in segments:
        overlaps = np.minimum(windows.ends, seg.end_s) - np.maximum(windows.starts, seg.start_s)
        np.clip(overlaps, 0.0, None, out=overlaps)
        frac[:, index[seg.label]] += overlaps / (windows.ends - windows.starts)
    return np.minimum(frac, 1.0)


def generate_corpus(
    cfg: SynthConfig, window_config: WindowConfig = WindowConfig()
) -> list[tuple[np.ndarray, ClipManifest]]:
    """Generate (embedding matrix, manifest) pairs for the whole corpus.

    Speaker ids are assigned round robin; weak labels are exactly the classes
    of the placed ground-truth segments.
    """
    corpus_rng = np.random.default_rng([cfg.seed, 7])
    speaker_offsets = corpus_rng.normal(
        0.0, _SPEAKER_JITTER_SIGMA * cfg.noise_sigma, size=(cfg.speakers, cfg.embedding_dim)
    )
    severities = corpus_rng.uniform(*_SPEAKER_SEVERITY_RANGE, size=cfg.speakers)
    speaker_means = [_class_means(cfg, severity=sev) for sev in severities]
    windows = make_windows(cfg.clip_duration_s, window_config)

    # The rate decides how many clips are dysfluent at all; dysfluent clips
    # then cover 35-55% of their duration (real dysfluent utterances carry a
    # substantial dysfluent fraction, and fully fluent clips stay plentiful
    # so the fluent class keeps enough supervision).
    p_dysfluent_clip = min(0.9, cfg.dysfluency_rate / _MEAN_COVERAGE_WHEN_DYSFLUENT)

    class_cycle = _ClassCycle(cfg.class_names, np.random.default_rng([cfg.seed, 13]))
    items = []
    for clip_idx in range(cfg.clip_count):
        speaker = clip_idx % cfg.speakers
        # Whether the clip is dysfluent is decided once; placement retries only
        # redraw the segment layout, so the dysfluent fraction stays honest.
        dysfluent = np.random.default_rng([cfg.seed, 500 + clip_idx]).random() < p_dysfluent_clip
        for attempt in range(_CLIP_ATTEMPTS):
            rng = np.random.default_rng([cfg.seed, 1000 + clip_idx, attempt])
            coverage_target = 0.0
            if dysfluent:
                coverage_target = float(rng.uniform(*_COVERAGE_RANGE_WHEN_DYSFLUENT))
            segments = _place_segments(rng, cfg, coverage_target, class_cycle)
            if segments is not None:
                if segments:
                    class_cycle.advance(1)
                break
        else:
            raise RuntimeError(
                f"could not reach a coverage of {coverage_target:.2f} in a "
                f"{cfg.clip_duration_s} s clip after {_CLIP_ATTEMPTS} attempts"
            )

        fluent_mean, class_means = speaker_means[speaker]
        frac = _window_mixture(windows, segments, cfg.class_names)
        fluent_frac = 1.0 - frac.sum(axis=1)
        means = fluent_frac[:, None] * fluent_mean + frac @ class_means
        emb = (
            means
            + speaker_offsets[speaker]
            + rng.normal(0.0, cfg.noise_sigma, size=(windows.count, cfg.embedding_dim))
        )
        emb *= np.exp(_ENERGY_JITTER * rng.standard_normal(windows.count))[:, None]
        manifest = ClipManifest(
            clip_id=f"clip{clip_idx:05d}",
            speaker_id=f"spk{speaker:03d}",
            duration_s=cfg.clip_duration_s,
            window_config=window_config,
            weak_labels=tuple({s.label for s in segments}),
            gt_segments=tuple(segments),
        )
        items.append((emb.astype(np.float32), manifest))
    return items


def speaker_split(speaker_id: str) -> str:
    """Alternating speaker-level split; disjoint by construction."""
    return "train" if int(speaker_id.removeprefix("spk")) % 2 == 0 else "eval"


def write_corpus(items, directory, classes) -> None:
    """Write embedding/manifest files plus the corpus index into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for emb, manifest in items:
        filename = f"{manifest.clip_id}.emb"
        write_embeddings(emb, manifest, directory / filename)
        entries.append(
            {
                "clip_id": manifest.clip_id,
                "speaker_id": manifest.speaker_id,
                "split": speaker_split(manifest.speaker_id),
                "file": filename,
            }
        )
    write_corpus_index(directory, classes, entries)


def corrupt_weak_labels(
    manifests, rate: float, rng: np.random.Generator, class_names
) -> list[ClipManifest]:
    """Flip one random class in or out of each clip's weak labels with given probability.

    Ground-truth segments are left untouched; this corrupts only what the
    classifier trains on.
    """
    if not (0.0 <= rate <= 1.0):
        raise ValueError(f"corruption rate must lie in [0, 1], got {rate}")
    out = []
    for m in manifests:
        labels = set(m.weak_labels)
        if rng.random() < rate:
            cls = class_names[int(rng.integers(len(class_names)))]
            labels.symmetric_difference_update({cls})
        out.append(
            ClipManifest(
                clip_id=m.clip_id,
                speaker_id=m.speaker_id,
                duration_s=m.duration_s,
                window_config=m.window_config,
                weak_labels=tuple(labels),
                gt_segments=m.gt_segments,
            )
        )
    return out

"""Interval metrics: time-F1, time-recall, onset error, macro-averaged.

A predicted segment counts as a true positive when its IoU with a
ground-truth segment of the same class exceeds 0.5; segments are paired
one-to-one, greedily by descending IoU. Scores are computed per speaker,
averaged (unweighted) over speakers into class scores, and then averaged
over classes into the overall score, so speakers and classes with more data
never dominate. Onset error is averaged over matched pairs only; unmatched
ground truth contributes no onset sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .segments import Segment
from .store import ClipManifest

IOU_THRESHOLD = 0.5


def interval_iou(a: Segment, b: Segment) -> float:
    """Intersection over union of two time intervals."""
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0.0:
        return 0.0
    union = max(a.end_s, b.end_s) - min(a.start_s, b.start_s)
    return inter / union


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one clip's predictions against its ground truth."""

    tp: int
    fp: int
    fn: int
    onset_errors: tuple[float, ...]
    pairs: tuple[tuple[int, int, float], ...]  # (pred index, gt index, iou)


def match_segments(
    predictions: Sequence[Segment],
    ground_truth: Sequence[Segment],
    iou_threshold: float = IOU_THRESHOLD,
) -> MatchResult:
    """Greedy one-to-one matching by descending IoU.

    Pairs with IoU strictly above the threshold become true positives;
    leftover predictions are false positives and leftover ground truth false
    negatives. Ties break on the lower prediction index, then gt index.
    """
    candidates = []
    for pi, p in enumerate(predictions):
        for gi, g in enumerate(ground_truth):
            iou = interval_iou(p, g)
            if iou > iou_threshold:
                candidates.append((-iou, pi, gi))
    candidates.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    onsets = []
    for neg_iou, pi, gi in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        pairs.append((pi, gi, -neg_iou))
        onsets.append(abs(predictions[pi].start_s - ground_truth[gi].start_s))
    tp = len(pairs)
    return MatchResult(
        tp=tp,
        fp=len(predictions) - tp,
        fn=len(ground_truth) - tp,
        onset_errors=tuple(onsets),
        pairs=tuple(pairs),
    )


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1); all zero when there are no true positives."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class SpeakerScore:
    """Per-speaker aggregate for one class."""

    tp: int
    fp: int
    fn: int
    t_f1: float
    t_recall: float
    onset_error: float | None  # None when no pairs matched


@dataclass(frozen=True)
class GroupScore:
    """Unweighted mean over the members of a class (or over all classes)."""

    t_f1: float
    t_recall: float
    onset_error: float | None
    members: int  # speakers (or classes) contributing to t_f1/t_recall
    onset_members: int  # members contributing onset samples


@dataclass(frozen=True)
class MatchAudit:
    clip_id: str
    class_name: str
    pair_count: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    """Full scoring output, from per-speaker detail up to the overall macro score."""

    class_names: tuple[str, ...]
    speaker_scores: dict[str, dict[str, SpeakerScore]]  # class -> speaker -> score
    class_scores: dict[str, GroupScore]
    overall: GroupScore
    audits: tuple[MatchAudit, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        def group(g: GroupScore) -> dict:
            return {
                "t_f1": g.t_f1,
                "t_recall": g.t_recall,
                "onset_error_s": g.onset_error,
                "members": g.members,
            }

        return {
            "classes": {name: group(score) for name, score in self.class_scores.items()},
            "overall": group(self.overall),
            "speakers": {
                cls: {
                    spk: {"t_f1": s.t_f1, "t_recall": s.t_recall,
                          "onset_error_s": s.onset_error,
                          "tp": s.tp, "fp": s.fp, "fn": s.fn}
                    for spk, s in per_spk.items()
                }
                for cls, per_spk in self.speaker_scores.items()
            },
            "notes": [
                "speakers without ground-truth instances of a class are excluded "
                "from that class's average",
                "onset error covers matched pairs only; unmatched ground truth "
                "contributes no onset sample",
            ],
        }

    def format_table(self) -> str:
        """Human-readable table: one t-F1 column per class, then overall scores."""
        headers = [*(f"{c[:9]:>10}" for c in self.class_names),
                   f"{'t-F1':>8}", f"{'t-recall':>9}", f"{'onset(s)':>9}"]
        cells = []
        for c in self.class_names:
            g = self.class_scores.get(c)
            cells.append(f"{g.t_f1:>10.3f}" if g and g.members else f"{'-':>10}")
        ov = self.overall
        onset = f"{ov.onset_error:>9.3f}" if ov.onset_error is not None else f"{'-':>9}"
        cells += [f"{ov.t_f1:>8.3f}", f"{ov.t_recall:>9.3f}", onset]
        return "".join(headers) + "\n" + "".join(cells)


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def evaluate_corpus(
    predictions: Mapping[str, Sequence[Segment]],
    manifests: Iterable[ClipManifest],
    class_names: Sequence[str],
    iou_threshold: float = IOU_THRESHOLD,
) -> EvalReport:
    """Score predictions against manifest ground truth with macro averaging.

    Every manifest defines one evaluated clip; clips absent from predictions
    count as having no predicted segments. Prediction keys that match no
    manifest, or manifests without ground truth, are rejected.
    """
    manifests = list(manifests)
    if not manifests:
        raise ValueError("empty evaluation set")
    known = {m.clip_id for m in manifests}
    unknown = set(predictions) - known
    if unknown:
        raise ValueError(f"predictions reference unknown clip ids: {sorted(unknown)[:5]}")

    # (class, speaker) -> accumulated counts
    acc: dict[tuple[str, str], dict] = {}
    audits = []
    for manifest in manifests:
        if manifest.gt_segments is None:
            raise ValueError(f"clip {manifest.clip_id} has no ground-truth segments")
        preds = list(predictions.get(manifest.clip_id, ()))
        for cls in class_names:
            p_cls = [s for s in preds if s.label == cls]
            g_cls = [s for s in manifest.gt_segments if s.label == cls]
            if not p_cls and not g_cls:
                continue
            res = match_segments(p_cls, g_cls, iou_threshold)
            slot = acc.setdefault(
                (cls, manifest.speaker_id), {"tp": 0, "fp": 0, "fn": 0, "onsets": []}
            )
            slot["tp"] += res.tp
            slot["fp"] += res.fp
            slot["fn"] += res.fn
            slot["onsets"].extend(res.onset_errors)
            audits.append(MatchAudit(manifest.clip_id, cls, res.tp, res.fp, res.fn))

    speaker_scores: dict[str, dict[str, SpeakerScore]] = {c: {} for c in class_names}
    class_scores: dict[str, GroupScore] = {}
    for cls in class_names:
        f1s, recalls, onset_means = [], [], []
        for (c, spk), slot in sorted(acc.items()):
            if c != cls:
                continue
            _, recall, f1 = f1_from_counts(slot["tp"], slot["fp"], slot["fn"])
            onset = _mean_or_none(slot["onsets"])
            speaker_scores[cls][spk] = SpeakerScore(
                tp=slot["tp"], fp=slot["fp"], fn=slot["fn"],
                t_f1=f1, t_recall=recall, onset_error=onset,
            )
            if slot["tp"] + slot["fn"] == 0:
                continue  # no ground truth from this speaker for this class
            f1s.append(f1)
            recalls.append(recall)
            if onset is not None:
                onset_means.append(onset)
        if f1s:
            class_scores[cls] = GroupScore(
                t_f1=float(np.mean(f1s)),
                t_recall=float(np.mean(recalls)),
                onset_error=_mean_or_none(onset_means),
                members=len(f1s),
                onset_members=len(onset_means),
            )

    if not class_scores:
        raise ValueError("no class has any ground-truth instance; nothing to score")

    overall_onsets = [g.onset_error for g in class_scores.values() if g.onset_error is not None]
    overall = GroupScore(
        t_f1=float(np.mean([g.t_f1 for g in class_scores.values()])),
        t_recall=float(np.mean([g.t_recall for g in class_scores.values()])),
        onset_error=_mean_or_none(overall_onsets),
        members=len(class_scores),
        onset_members=len(overall_onsets),
    )
    return EvalReport(
        class_names=tuple(class_names),
        speaker_scores=speaker_scores,
        class_scores=class_scores,
        overall=overall,
        audits=tuple(audits),
    )

"""Equal error rate and the ROC sweep underlying it.

Convention: bonafide is the positive, high-score class. A trial is
accepted (predicted bonafide) iff score >= threshold. False positive
rate = fraction of spoof trials accepted; false negative rate =
fraction of bonafide trials rejected. EER is read off the ROC polyline
by linear interpolation between the two points straddling fpr == fnr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifest import ManifestEntry


class ScoreError(ValueError):
    pass


@dataclass
class ScoreSet:
    trial_ids: list[str]
    scores: np.ndarray
    labels: list[str] | None = None  # "bonafide" / "spoof", aligned with trial_ids

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1 or len(self.trial_ids) != self.scores.size:
            raise ScoreError("trial_ids and scores must be equal-length 1-D")
        if len(set(self.trial_ids)) != len(self.trial_ids):
            raise ScoreError("duplicate trial_id in score set")
        if not np.all(np.isfinite(self.scores)):
            raise ScoreError("non-finite score")
        if self.labels is not None:
            if len(self.labels) != len(self.trial_ids):
                raise ScoreError("labels length mismatch")
            bad = set(self.labels) - {"bonafide", "spoof"}
            if bad:
                raise ScoreError(f"unknown labels: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.trial_ids)


def _split_scores(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    if scores.labels is None:
        raise ScoreError("score set has no labels; join a manifest first")
    labels = np.asarray(scores.labels)
    bona = scores.scores[labels == "bonafide"]
    spoof = scores.scores[labels == "spoof"]
    if bona.size == 0 or spoof.size == 0:
        raise ScoreError("both classes required to compute error rates")
    return bona, spoof


def roc_curve(scores: ScoreSet) -> list[tuple[float, float, float]]:
    """(threshold, fpr, fnr) at every distinct score value plus +/-inf
    sentinels, sorted by ascending threshold. Tied trials flip together."""
    bona, spoof = _split_scores(scores)
    thresholds = np.concatenate(([-np.inf], np.unique(scores.scores), [np.inf]))
    # score >= t counts, computed via sorted search
    bona_sorted = np.sort(bona)
    spoof_sorted = np.sort(spoof)
    points = []
    for t in thresholds:
        fpr = 1.0 - np.searchsorted(spoof_sorted, t, side="left") / spoof.size
        fnr = np.searchsorted(bona_sorted, t, side="left") / bona.size
        points.append((float(t), float(fpr), float(fnr)))
    return points


def eer(scores: ScoreSet) -> float:
    """Interpolated equal error rate in [0, 1]."""
    points = roc_curve(scores)
    diffs = [fpr - fnr for _, fpr, fnr in points]
    # fpr - fnr is non-increasing in threshold: starts at +1, ends at -1.
    for i in range(len(points) - 1):
        d0, d1 = diffs[i], diffs[i + 1]
        if d0 == 0.0:
            return points[i][1]
        if d0 > 0.0 >= d1:
            _, fpr0, fnr0 = points[i]
            _, fpr1, fnr1 = points[i + 1]
            denom = (fnr1 - fnr0) - (fpr1 - fpr0)
            if denom == 0.0:
                return (fpr0 + fnr0) / 2.0
            s = (fpr0 - fnr0) / denom
            return float(fpr0 + s * (fpr1 - fpr0))
    return points[-1][1] if diffs[-1] == 0.0 else 0.5


def join_labels(score_set: ScoreSet, manifest: list[ManifestEntry]) -> ScoreSet:
    """Attach labels from a manifest to a label-less score set."""
    label_of = {e.trial_id: e.label for e in manifest}
    missing = [t for t in score_set.trial_ids if t not in label_of]
    if missing:
        raise ScoreError(f"trials missing from manifest: {missing[:5]}")
    return ScoreSet(
        score_set.trial_ids,
        score_set.scores,
        [label_of[t] for t in score_set.trial_ids],
    )


def write_scores(score_set: ScoreSet, path) -> None:
    """Score TSV: ``trial_id\tscore`` lines, full float precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for tid, s in zip(score_set.trial_ids, score_set.scores):
            fh.write(f"{tid}\t{float(s)!r}\n")


def read_scores(path, manifest: list[ManifestEntry] | None = None) -> ScoreSet:
    trial_ids: list[str] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ScoreError(f"{path}:{lineno}: expected 'trial_id\\tscore'")
            trial_ids.append(parts[0])
            values.append(float(parts[1]))
    scores = ScoreSet(trial_ids, np.asarray(values))
    if manifest is not None:
        scores = join_labels(scores, manifest)
    return scores

"""Late fusion of per-system probabilities by logistic regression with
unconstrained weights, plus the anchored ablation grid over subsets of
systems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import ScoreError, ScoreSet, eer
from .probe import TrainConfig, _fit, sigmoid


class FusionError(ValueError):
    pass


@dataclass
class FusionModel:
    system_ids: list[str]
    weights: np.ndarray
    bias: float
    logit_space: bool = False  # fuse logits instead of probabilities

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.size != len(self.system_ids):
            raise FusionError("one weight per system required")
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise FusionError("non-finite fusion parameters")


def align(score_sets: list[ScoreSet]) -> tuple[np.ndarray, list[str] | None, list[str]]:
    """Stack score sets into a (trials x systems) matrix with rows keyed
    by sorted trial_id. All sets must cover the same trials; no imputation.

    Returns (matrix, labels, trial_ids); labels come from the first
    labelled set and must agree across sets.
    """
    if not score_sets:
        raise FusionError("no score sets to align")
    universe = sorted(score_sets[0].trial_ids)
    for k, ss in enumerate(score_sets):
        missing = sorted(set(universe) - set(ss.trial_ids)) + sorted(
            set(ss.trial_ids) - set(universe)
        )
        if missing:
            raise FusionError(f"score set {k} trial coverage mismatch: {missing[:10]}")
    matrix = np.empty((len(universe), len(score_sets)))
    for k, ss in enumerate(score_sets):
        pos = {tid: i for i, tid in enumerate(ss.trial_ids)}
        matrix[:, k] = ss.scores[[pos[tid] for tid in universe]]

    labels = None
    for ss in score_sets:
        if ss.labels is None:
            continue
        pos = {tid: lab for tid, lab in zip(ss.trial_ids, ss.labels)}
        ordered = [pos[tid] for tid in universe]
        if labels is None:
            labels = ordered
        elif labels != ordered:
            raise FusionError("score sets disagree on trial labels")
    return matrix, labels, universe


def train_fusion(
    matrix: np.ndarray,
    labels,
    config: TrainConfig | str = "probe",
    system_ids: list[str] | None = None,
    logit_space: bool = False,
) -> FusionModel:
    """Logistic regression over the per-system probability columns, same
    solver contract as the probe trainer. Weights are unconstrained."""
    if isinstance(config, str):
        from .probe import PRESETS

        config = PRESETS[config]
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise FusionError("matrix must be trials x systems")
    if system_ids is None:
        system_ids = [f"system{k}" for k in range(matrix.shape[1])]
    y = _binary_labels(labels)
    if y.min() == y.max():
        raise FusionError("single class in fusion training data")
    for k in range(matrix.shape[1]):
        if np.ptp(matrix[:, k]) == 0.0:
            warnings.warn(f"system {system_ids[k]!r} outputs a constant score")
    feats = _logit(matrix) if logit_space else matrix
    w, b = _fit(feats, y, config)
    return FusionModel(list(system_ids), w, b, logit_space=logit_space)


def apply_fusion(model: FusionModel, score_sets: list[ScoreSet]) -> ScoreSet:
    """Fused score per trial: sigmoid(bias + sum_k weight_k * p_k)."""
    matrix, labels, trial_ids = align(score_sets)
    if matrix.shape[1] != len(model.system_ids):
        raise FusionError(
            f"model has {len(model.system_ids)} systems, got {matrix.shape[1]} score sets"
        )
    feats = _logit(matrix) if model.logit_space else matrix
    fused = sigmoid(feats @ model.weights + model.bias)
    return ScoreSet(trial_ids, fused, labels)


def ablation_grid(
    system_ids: list[str],
    train_sets: list[ScoreSet],
    eval_sets: list[ScoreSet],
    config: TrainConfig | str = "probe",
    all_subsets: bool = False,
) -> list[tuple[tuple[str, ...], float]]:
    """Evaluate the anchored family of fusion subsets.

    Rows, in order: the best single system (by solo eval EER); the best
    system paired with each other system; the best system with its two
    strongest partners; all systems. With ``all_subsets`` every non-empty
    subset is evaluated instead.
    """
    if not system_ids:
        raise FusionError("no systems given")
    if not (len(system_ids) == len(train_sets) == len(eval_sets)):
        raise FusionError("system_ids, train_sets and eval_sets must be aligned")

    solo = {sid: eer(ss) for sid, ss in zip(system_ids, eval_sets)}
    order = sorted(system_ids, key=lambda sid: (solo[sid], sid))
    best, others = order[0], order[1:]

    if all_subsets:
        from itertools import combinations

        subsets = [
            combo
            for size in range(1, len(system_ids) + 1)
            for combo in combinations(system_ids, size)
        ]
    else:
        subsets = [(best,)]
        subsets += [(best, other) for other in others]
        if len(others) >= 2:
            subsets.append((best, others[0], others[1]))
        if len(system_ids) > 1:
            subsets.append(tuple(system_ids))

    by_id = dict(zip(system_ids, zip(train_sets, eval_sets)))
    rows = []
    for subset in subsets:
        if len(subset) == 1:
            rows.append((subset, solo[subset[0]]))
            continue
        tr = [by_id[sid][0] for sid in subset]
        ev = [by_id[sid][1] for sid in subset]
        matrix, labels, _ = align(tr)
        model = train_fusion(matrix, labels, config, system_ids=list(subset))
        rows.append((subset, eer(apply_fusion(model, ev))))
    return rows


def format_grid(rows: list[tuple[tuple[str, ...], float]], tsv: bool = False) -> str:
    if tsv:
        lines = ["systems\teer_percent"]
        lines += [f"{'+'.join(subset)}\t{100 * value:.2f}" for subset, value in rows]
        return "\n".join(lines) + "\n"
    width = max(len("+".join(subset)) for subset, _ in rows)
    lines = [f"{'systems':<{width}}  EER[%]"]
    for subset, value in rows:
        lines.append(f"{'+'.join(subset):<{width}}  {100 * value:6.2f}")
    return "\n".join(lines) + "\n"


def write_fusion_model(model: FusionModel, path) -> None:
    """Text key-value form: one ``system_id = weight`` line per system,
    then ``bias``; ``space`` records probability vs logit fusion."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for sid, w in zip(model.system_ids, model.weights):
            fh.write(f"{sid} = {float(w)!r}\n")
        fh.write(f"bias = {float(model.bias)!r}\n")
        fh.write(f"space = {'logit' if model.logit_space else 'probability'}\n")


def read_fusion_model(path) -> FusionModel:
    system_ids: list[str] = []
    weights: list[float] = []
    bias = 0.0
    logit_space = False
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FusionError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "bias":
                bias = float(value)
            elif key == "space":
                logit_space = value == "logit"
            else:
                system_ids.append(key)
                weights.append(float(value))
    return FusionModel(system_ids, np.asarray(weights), bias, logit_space=logit_space)


def _binary_labels(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "UO":
        bad = set(arr.tolist()) - {"bonafide", "spoof"}
        if bad:
            raise ScoreError(f"unknown labels: {sorted(bad)}")
        return (arr == "bonafide").astype(float)
    return arr.astype(float)


def _logit(p: np.ndarray) -> np.ndarray:
    q = np.clip(p, 1e-12, 1.0 - 1e-12)
    return np.log(q) - np.log1p(-q)

"""Ensemble algorithms over matrices of base-predictor scores.

All combiners consume a score matrix whose columns are (modality, learner)
pairs and aggregate flat across all columns; there is no per-modality
pre-aggregation step.  Four kinds are supported:

* ``mean`` / ``median`` - row-wise aggregation (even column counts use the
  midpoint of the two central values).
* ``stacker``           - a meta learner fit on the score matrix.
* ``greedy``            - forward stepwise selection with replacement over
  columns, maximizing a bagged metric of the running mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learners import FittedBaseModel, LearnerSpec, fit_learner, predict_proba
from .metrics import fmax, roc_auc

ENSEMBLE_KINDS = ("mean", "median", "stacker", "greedy")
GREEDY_METRICS = ("auc", "fmax")


def _metric_value(name: str, scores, labels) -> float:
    if name == "auc":
        return roc_auc(scores, labels)
    if name == "fmax":
        return fmax(scores, labels)[0]
    raise ValueError(f"unknown metric {name!r}")


@dataclass(frozen=True)
class EnsembleSpec:
    """One ensemble to build: kind, id, and kind-specific options."""

    kind: str
    id: str
    meta: LearnerSpec | None = None
    metric: str = "auc"
    bags: int = 10
    max_iter: int | None = None

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if not self.id:
            raise ValueError("ensemble id must be non-empty")
        if self.kind == "stacker" and self.meta is None:
            object.__setattr__(self, "meta", LearnerSpec("logistic"))
        if self.kind == "greedy":
            if self.metric not in GREEDY_METRICS:
                raise ValueError(f"unknown metric {self.metric!r}")
            if self.bags < 1:
                raise ValueError("bags must be at least 1")
            if self.max_iter is not None and self.max_iter < 1:
                raise ValueError("max_iter must be at least 1")


@dataclass
class EnsembleModel:
    """A trained ensemble; ``selected`` and ``trace`` are greedy-only."""

    spec: EnsembleSpec
    column_keys: list[tuple[str, str]]
    stacker: FittedBaseModel | None = None
    selected: list[int] | None = None
    trace: list[float] | None = None

    @property
    def selected_keys(self) -> list[tuple[str, str]] | None:
        if self.selected is None:
            return None
        return [self.column_keys[i] for i in self.selected]


def default_ensembles() -> list[EnsembleSpec]:
    """The standard roster: mean, median, logistic stacker, greedy AUC."""
    return [
        EnsembleSpec("mean", id="mean"),
        EnsembleSpec("median", id="median"),
        EnsembleSpec("stacker", id="stack_logistic", meta=LearnerSpec("logistic")),
        EnsembleSpec("greedy", id="greedy_auc", metric="auc"),
    ]


def _check_matrix(T) -> np.ndarray:
    T = np.ascontiguousarray(np.asarray(T, dtype=np.float64))
    if T.ndim != 2 or T.size == 0:
        raise ValueError("score matrix must be 2-D and non-empty")
    return T


def aggregate_mean(T) -> np.ndarray:
    """Row-wise arithmetic mean of a score matrix."""
    return _check_matrix(T).mean(axis=1)


def aggregate_median(T) -> np.ndarray:
    """Row-wise median; even column counts use the central midpoint."""
    return np.median(_check_matrix(T), axis=1)


def train_stacker(T, y, meta: LearnerSpec, seed: int, column_keys=None) -> EnsembleModel:
    """Fit the meta learner on the score matrix; deterministic in seed."""
    T = _check_matrix(T)
    keys = list(column_keys) if column_keys is not None else _anonymous_keys(T)
    spec = EnsembleSpec("stacker", id=meta.name, meta=meta)
    model = fit_learner(meta, T, y, seed)
    return EnsembleModel(spec=spec, column_keys=keys, stacker=model)


def _anonymous_keys(T: np.ndarray) -> list[tuple[str, str]]:
    return [("", f"c{i}") for i in range(T.shape[1])]


def _bootstrap_bags(y: np.ndarray, bags: int, seed: int) -> list[np.ndarray]:
    """Per-bag row resamples; redrawn until both classes are present."""
    n = y.size
    out = []
    for b in range(bags):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,)))
        )
        idx = rng.integers(0, n, size=n)
        while y[idx].min() == y[idx].max():
            idx = rng.integers(0, n, size=n)
        out.append(idx)
    return out


def train_greedy(
    T, y, metric: str = "auc", bags: int = 10, max_iter: int | None = None,
    seed: int = 0, column_keys=None,
) -> EnsembleModel:
    """Forward stepwise selection with replacement over columns.

    Starting from the empty selection, repeatedly add the column whose
    inclusion maximizes the chosen metric of the running mean, averaged
    over ``bags`` bootstrap row resamples.  Stops after ``max_iter``
    additions (default: the column count) or when no addition strictly
    improves the bagged metric; ties break to the lowest column index.
    """
    if metric not in GREEDY_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    T = _check_matrix(T)
    y = np.asarray(y)
    if y.size != T.shape[0]:
        raise ValueError("labels must align with score matrix rows")
    keys = list(column_keys) if column_keys is not None else _anonymous_keys(T)
    n_cols = T.shape[1]
    limit = n_cols if max_iter is None else max_iter
    bag_indices = _bootstrap_bags(y, bags, seed)

    selected: list[int] = []
    trace: list[float] = []
    running = np.zeros(T.shape[0])
    current = -np.inf
    while len(selected) < limit:
        candidate_values = np.empty(n_cols)
        for c in range(n_cols):
            blended = (running + T[:, c]) / (len(selected) + 1)
            total = 0.0
            for idx in bag_indices:
                total += _metric_value(metric, blended[idx], y[idx])
            candidate_values[c] = total / len(bag_indices)
        best = int(np.argmax(candidate_values))  # first max = lowest index
        if candidate_values[best] <= current:
            break
        current = float(candidate_values[best])
        selected.append(best)
        trace.append(current)
        running = running + T[:, best]
    spec = EnsembleSpec("greedy", id="greedy", metric=metric, bags=bags, max_iter=max_iter)
    return EnsembleModel(spec=spec, column_keys=keys, selected=selected, trace=trace)


def train_ensemble(spec: EnsembleSpec, T, y, column_keys, seed: int) -> EnsembleModel:
    """Train one ensemble of any kind on (T, y); pure in its arguments."""
    T = _check_matrix(T)
    keys = list(column_keys)
    if spec.kind == "mean" or spec.kind == "median":
        return EnsembleModel(spec=spec, column_keys=keys)
    if spec.kind == "stacker":
        model = fit_learner(spec.meta, T, y, seed)
        return EnsembleModel(spec=spec, column_keys=keys, stacker=model)
    trained = train_greedy(
        T, y, metric=spec.metric, bags=spec.bags, max_iter=spec.max_iter,
        seed=seed, column_keys=keys,
    )
    return EnsembleModel(
        spec=spec, column_keys=keys, selected=trained.selected, trace=trained.trace
    )


def apply_ensemble(model: EnsembleModel, S) -> np.ndarray:
    """Score rows of ``S`` (columns must match the model's column keys)."""
    S = _check_matrix(S)
    if S.shape[1] != len(model.column_keys):
        raise ValueError(
            f"column mismatch: model has {len(model.column_keys)} columns, "
            f"matrix has {S.shape[1]}"
        )
    kind = model.spec.kind
    if kind == "mean":
        return aggregate_mean(S)
    if kind == "median":
        return aggregate_median(S)
    if kind == "stacker":
        return predict_proba(model.stacker, S)
    if not model.selected:
        raise ValueError("greedy model has an empty selection")
    return S[:, model.selected].mean(axis=1)

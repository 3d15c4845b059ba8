"""Permutation-based interpretation of a fitted ensemble pipeline.

Two layers of importance are combined into one ranked feature list:

* model importance (MI): permutation importance of each base-predictor
  score column under the chosen ensemble, computed over the final ensemble
  training matrix;
* local feature importance (LFI): permutation importance of each feature
  under a single final base model, computed on that model's modality
  matrix.

The final score of feature f in modality i is the sum over that modality's
base predictors b of ``MI(b) * LFI(f | b)``, with both importance vectors
clipped at zero and normalized to sum to 1 (or left all-zero when every
permutation drop is <= 0).  LFI is evaluated in-sample on the training
data with the final base models, which is optimistically biased; ranks are
for relative comparison, not unbiased effect estimates.

The shuffle permutation of repeat r is derived from (seed, r) and shared
across columns, so identical columns receive identical drops and symmetric
inputs rank equally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .ensembles import apply_ensemble
from .learners import predict_proba
from .metrics import fmax, roc_auc

RANKING_COLUMNS = ["modality", "feature", "score", "rank"]


def _metric_fn(name: str):
    if name == "auc":
        return roc_auc
    if name == "fmax":
        return lambda s, y: fmax(s, y)[0]
    raise ValueError(f"unknown metric {name!r}")


@dataclass
class ImportanceVector:
    """Raw permutation drops plus clipped, normalized weights per key."""

    keys: list
    drops: np.ndarray
    weights: np.ndarray


def _normalize(drops: np.ndarray) -> np.ndarray:
    clipped = np.clip(drops, 0.0, None)
    total = clipped.sum()
    if total <= 0.0:
        return np.zeros_like(clipped)
    return clipped / total


def permutation_importance(
    score_fn, X, y, metric: str = "auc", n_repeats: int = 10, seed: int = 0,
    keys=None,
) -> ImportanceVector:
    """Mean metric drop when one column of ``X`` is shuffled, per column.

    ``score_fn`` maps a matrix with the same shape as ``X`` to a score
    vector.  Each repeat r uses one seed-derived row permutation applied to
    whichever column is being tested, so columns are compared under
    matched shuffles.  Deterministic in (X, y, metric, n_repeats, seed).
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be at least 1")
    metric_fn = _metric_fn(metric)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, n_cols = X.shape
    baseline = metric_fn(score_fn(X), y)
    permutations = [
        np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(r,)))
        ).permutation(n)
        for r in range(n_repeats)
    ]
    drops = np.empty(n_cols)
    for c in range(n_cols):
        total = 0.0
        for perm in permutations:
            shuffled = X.copy()
            shuffled[:, c] = X[perm, c]
            total += baseline - metric_fn(score_fn(shuffled), y)
        drops[c] = total / n_repeats
    if keys is None:
        keys = list(range(n_cols))
    return ImportanceVector(keys=list(keys), drops=drops, weights=_normalize(drops))


def ensemble_model_importance(
    pipe, ensemble_id: str, metric: str = "auc", n_repeats: int = 10, seed: int = 0,
) -> ImportanceVector:
    """Permutation importance of each base-score column under an ensemble."""
    if ensemble_id not in pipe.ensembles_:
        raise ValueError(f"unknown ensemble_id {ensemble_id!r}")
    model = pipe.ensembles_[ensemble_id]
    T, keys = pipe.final_training_data()
    return permutation_importance(
        lambda M: apply_ensemble(model, M),
        T,
        pipe.dataset.labels,
        metric=metric,
        n_repeats=n_repeats,
        seed=seed,
        keys=keys,
    )


def _dense_ranks(scores: np.ndarray) -> np.ndarray:
    """Dense ranking, 1 = highest score; equal scores share a rank."""
    order = np.argsort(-scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.int64)
    rank = 0
    previous = None
    for position in order:
        if previous is None or scores[position] != previous:
            rank += 1
            previous = scores[position]
        ranks[position] = rank
    return ranks


def interpret(
    pipe, ensemble_id: str, metric: str = "auc", n_repeats: int = 10, seed: int = 0,
) -> pd.DataFrame:
    """Rank every input feature's contribution to a final ensemble.

    Returns a frame with columns (modality, feature, score, rank), rank 1
    most important, rows sorted by rank then (modality, feature).  Requires
    a pipeline fitted with a final model and its training dataset attached.
    """
    if pipe.dataset is None:
        raise RuntimeError("interpret requires the training dataset on the pipeline")
    mi = ensemble_model_importance(
        pipe, ensemble_id, metric=metric,
        n_repeats=n_repeats, seed=derive_interpret_seed(seed, 0, 0),
    )
    mi_weight = dict(zip(mi.keys, mi.weights))
    y = pipe.dataset.labels
    final_models = pipe.final_base_models_
    rows = []
    for mod in pipe.dataset.modality_names:
        matrix = pipe.dataset.modality(mod)
        scores = np.zeros(len(matrix.feature_names))
        for b, model in enumerate(final_models[mod]):
            weight = mi_weight[(mod, model.spec.name)]
            lfi = permutation_importance(
                lambda M, _m=model: predict_proba(_m, M),
                matrix.features,
                y,
                metric=metric,
                n_repeats=n_repeats,
                seed=derive_interpret_seed(seed, 1, _column_offset(pipe, mod, b)),
            )
            scores += weight * lfi.weights
        for feature, score in zip(matrix.feature_names, scores):
            rows.append({"modality": mod, "feature": feature, "score": float(score)})
    frame = pd.DataFrame(rows, columns=RANKING_COLUMNS[:3])
    frame = frame.sort_values(["modality", "feature"], kind="mergesort").reset_index(drop=True)
    frame["rank"] = _dense_ranks(frame["score"].to_numpy())
    frame = frame.sort_values(["rank", "modality", "feature"], kind="mergesort")
    return frame.reset_index(drop=True)


def derive_interpret_seed(seed: int, stage: int, index: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(stage, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _column_offset(pipe, mod: str, learner_index: int) -> int:
    keys = pipe.column_keys()
    name = pipe.final_base_models_[mod][learner_index].spec.name
    return keys.index((mod, name))

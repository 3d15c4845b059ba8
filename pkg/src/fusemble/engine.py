"""Nested cross-validation engine for multi-modal heterogeneous ensembles.

The workflow has two stages.  ``fit_base`` trains every (modality, learner)
pair under nested CV and assembles matrices of out-of-fold base scores;
``fit_ensemble`` trains ensemble methods on those matrices.  Two modes can
run, separately or together:

* evaluate:  for each outer fold, an inner CV over the outer-train split
  produces the ensemble training matrix T_o, and models retrained on the
  full outer-train split score the outer-test split into the test matrix
  S_o.  Pooled outer-test scores feed the base and ensemble summaries, so
  base predictors and ensembles are compared on the same held-out samples.
* build_final: one inner CV over all data produces the final ensemble
  training matrix, and every pair retrained on all data becomes the
  deployable base layer used by ``predict``.

Every training task derives its RNG seed purely from (master seed, outer
fold, inner fold, modality index, learner index), so results are
bit-identical for any worker count and for iterative per-modality
``fit_base`` calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .data import MultiModalDataset, FoldAssignment, stratified_k_fold, validate_dataset
from .ensembles import EnsembleModel, EnsembleSpec, apply_ensemble, train_ensemble
from .learners import (
    FittedBaseModel,
    LearnerSpec,
    TrainingError,
    fit_learner,
    predict_proba,
)
from .metrics import build_summary

MODES = ("evaluate", "build_final", "both")

# spawn-key tags for deterministic seed derivation
_TAG_OUTER_SPLIT = 0
_TAG_INNER_SPLIT = 1
_TAG_TASK = 2
_TAG_ENSEMBLE = 3


def derive_seed(master: int, *key: int) -> int:
    """Pure 64-bit seed derivation from a master seed and an integer key."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation topology and master seed."""

    k_outer: int = 5
    k_inner: int = 5
    seed: int = 0
    mode: str = "both"

    def __post_init__(self):
        if self.k_outer < 2 or self.k_inner < 2:
            raise ValueError("k_outer and k_inner must be at least 2")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative 64-bit integer")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def runs_evaluate(self) -> bool:
        return self.mode in ("evaluate", "both")

    @property
    def runs_final(self) -> bool:
        return self.mode in ("build_final", "both")


@dataclass
class FoldData:
    """Assembled per-outer-fold matrices in canonical column order."""

    fold: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    train_matrix: np.ndarray  # out-of-fold scores over the outer-train split
    test_matrix: np.ndarray  # retrained-model scores on the outer-test split


def _fit_score_task(spec, X_fit, y_fit, X_score, seed, keep_model, context):
    try:
        model = fit_learner(spec, X_fit, y_fit, seed)
    except TrainingError as exc:
        raise TrainingError(f"{context}: {exc}") from None
    scores = predict_proba(model, X_score) if X_score is not None else None
    return scores, (model if keep_model else None)


class EnsemblePipeline:
    """Builds, evaluates, and deploys multi-modal heterogeneous ensembles.

    Typical use::

        pipe = EnsemblePipeline(CvConfig(k_outer=5, k_inner=5, seed=0))
        pipe.fit_base(dataset, {"clinical": default_learners(), ...})
        pipe.fit_ensemble(default_ensembles())
        print(pipe.base_summary)
        print(pipe.ensemble_summary)
        scores = pipe.predict({"clinical": X_new, ...}, "stack_logistic")

    ``fit_base`` may also be called once per modality; the accumulated
    assignment must cover every modality before ``fit_ensemble``.
    """

    def __init__(self, cv: CvConfig | None = None, workers: int = 1):
        self.cv = cv if cv is not None else CvConfig()
        self.workers = int(workers)
        self.dataset: MultiModalDataset | None = None
        self._assignment: dict[str, list[LearnerSpec]] = {}
        self._modality_feature_names: dict[str, list[str]] = {}
        self._outer: FoldAssignment | None = None
        self._inner: dict[int, FoldAssignment] = {}
        self._final_inner: FoldAssignment | None = None
        self._blocks: dict[str, dict] = {}
        self.ensembles_: dict[str, EnsembleModel] = {}
        self._ensemble_specs: list[EnsembleSpec] = []
        self._ensemble_pooled: dict[str, np.ndarray] = {}
        self._ensemble_summary: pd.DataFrame | None = None

    # -- fold plumbing ------------------------------------------------

    def _build_folds(self):
        y = self.dataset.labels
        seed = self.cv.seed
        try:
            if self.cv.runs_evaluate:
                self._outer = stratified_k_fold(
                    y, self.cv.k_outer, derive_seed(seed, _TAG_OUTER_SPLIT)
                )
                for o in range(self.cv.k_outer):
                    tr = self._outer.train_indices(o)
                    self._inner[o] = stratified_k_fold(
                        y[tr], self.cv.k_inner,
                        derive_seed(seed, _TAG_INNER_SPLIT, o + 1),
                    )
            if self.cv.runs_final:
                self._final_inner = stratified_k_fold(
                    y, self.cv.k_inner, derive_seed(seed, _TAG_INNER_SPLIT, 0)
                )
        except ValueError as exc:
            raise ValueError(f"fold infeasibility: {exc}") from None

    def _check_same_dataset(self, ds: MultiModalDataset):
        same = (
            ds.sample_ids == self.dataset.sample_ids
            and np.array_equal(ds.labels, self.dataset.labels)
            and ds.modality_names == self.dataset.modality_names
        )
        if not same:
            raise ValueError("fit_base was called with a different dataset")

    # -- base stage ----------------------------------------------------

    def fit_base(self, dataset: MultiModalDataset, assignment) -> "EnsemblePipeline":
        """Train base predictors for the assigned modalities under nested CV.

        ``assignment`` maps modality name -> list of LearnerSpec; a plain
        list applies the same roster to every dataset modality.  Modalities
        already fitted cannot be reassigned.
        """
        if isinstance(assignment, (list, tuple)):
            assignment = {name: list(assignment) for name in dataset.modality_names}
        if not assignment:
            raise ValueError("assignment must cover at least one modality")
        for name, specs in assignment.items():
            if name not in dataset.modality_names:
                raise ValueError(f"unknown modality {name!r}")
            if name in self._assignment:
                raise ValueError(f"modality {name!r} was already fitted")
            if not specs:
                raise ValueError(f"modality {name!r} needs at least one learner")
            learner_names = [s.name for s in specs]
            if len(set(learner_names)) != len(learner_names):
                raise ValueError(f"duplicate learner names for modality {name!r}")

        if self.dataset is None:
            report = validate_dataset(dataset)
            if report:
                details = "; ".join(str(v) for v in report[:10])
                raise ValueError(f"invalid dataset: {details}")
            self.dataset = dataset
            self._modality_feature_names = {
                m.name: list(m.feature_names) for m in dataset.modalities
            }
            self._build_folds()
        else:
            self._check_same_dataset(dataset)

        tasks = []  # (mod, learner_idx, kind, outer, inner, fit_idx, score_idx, seed, keep)
        y = self.dataset.labels
        seed = self.cv.seed
        mod_index = {name: i for i, name in enumerate(self.dataset.modality_names)}
        for mod, specs in assignment.items():
            mi = mod_index[mod]
            if self.cv.runs_evaluate:
                for o in range(self.cv.k_outer):
                    tr = self._outer.train_indices(o)
                    te = self._outer.test_indices(o)
                    inner = self._inner[o]
                    for q in range(self.cv.k_inner):
                        fit_idx = tr[inner.fold_of != q]
                        score_idx = tr[inner.fold_of == q]
                        for li in range(len(specs)):
                            tasks.append((
                                mod, li, "T", o, q, fit_idx, score_idx,
                                derive_seed(seed, _TAG_TASK, o + 1, q + 1, mi, li),
                                False,
                            ))
                    for li in range(len(specs)):
                        tasks.append((
                            mod, li, "S", o, 0, tr, te,
                            derive_seed(seed, _TAG_TASK, o + 1, 0, mi, li),
                            True,
                        ))
            if self.cv.runs_final:
                everything = np.arange(self.dataset.n_samples)
                for q in range(self.cv.k_inner):
                    fit_idx = self._final_inner.train_indices(q)
                    score_idx = self._final_inner.test_indices(q)
                    for li in range(len(specs)):
                        tasks.append((
                            mod, li, "F", 0, q, fit_idx, score_idx,
                            derive_seed(seed, _TAG_TASK, 0, q + 1, mi, li),
                            False,
                        ))
                for li in range(len(specs)):
                    tasks.append((
                        mod, li, "final", 0, 0, everything, None,
                        derive_seed(seed, _TAG_TASK, 0, 0, mi, li),
                        True,
                    ))

        results = Parallel(n_jobs=self.workers)(
            delayed(_fit_score_task)(
                assignment[mod][li],
                self.dataset.modality(mod).features[fit_idx],
                y[fit_idx],
                None if score_idx is None
                else self.dataset.modality(mod).features[score_idx],
                task_seed,
                keep,
                f"modality {mod!r}, learner {assignment[mod][li].name!r}",
            )
            for mod, li, kind, o, q, fit_idx, score_idx, task_seed, keep in tasks
        )

        n = self.dataset.n_samples
        for mod, specs in assignment.items():
            block = {
                "T": {}, "S": {}, "fold_models": {},
                "final_T": np.full((n, len(specs)), np.nan) if self.cv.runs_final else None,
                "final_models": [None] * len(specs) if self.cv.runs_final else None,
            }
            if self.cv.runs_evaluate:
                for o in range(self.cv.k_outer):
                    n_tr = self._outer.train_indices(o).size
                    n_te = self._outer.test_indices(o).size
                    block["T"][o] = np.full((n_tr, len(specs)), np.nan)
                    block["S"][o] = np.full((n_te, len(specs)), np.nan)
                    block["fold_models"][o] = [None] * len(specs)
            self._blocks[mod] = block

        for (mod, li, kind, o, q, fit_idx, score_idx, _, _), (scores, model) in zip(
            tasks, results
        ):
            block = self._blocks[mod]
            if kind == "T":
                positions = np.flatnonzero(self._inner[o].fold_of == q)
                block["T"][o][positions, li] = scores
            elif kind == "S":
                block["S"][o][:, li] = scores
                block["fold_models"][o][li] = model
            elif kind == "F":
                block["final_T"][score_idx, li] = scores
            else:
                block["final_models"][li] = model

        for mod, specs in assignment.items():
            self._assignment[mod] = list(specs)
        return self

    # -- assembled matrices ---------------------------------------------

    def column_keys(self) -> list[tuple[str, str]]:
        """(modality, learner) pairs: dataset modality order, learner order."""
        keys = []
        for name in self.dataset.modality_names if self.dataset else self._assignment:
            if name in self._assignment:
                keys.extend((name, spec.name) for spec in self._assignment[name])
        return keys

    def _assigned_in_order(self) -> list[str]:
        if self.dataset is not None:
            return [m for m in self.dataset.modality_names if m in self._assignment]
        return list(self._assignment)

    def outer_fold_data(self) -> list[FoldData]:
        """Per-outer-fold train/test matrices for the assigned modalities."""
        self._require_base("outer_fold_data")
        if not self.cv.runs_evaluate:
            raise RuntimeError("outer fold data requires evaluate mode")
        out = []
        mods = self._assigned_in_order()
        for o in range(self.cv.k_outer):
            T = np.hstack([self._blocks[m]["T"][o] for m in mods])
            S = np.hstack([self._blocks[m]["S"][o] for m in mods])
            out.append(
                FoldData(
                    fold=o,
                    train_indices=self._outer.train_indices(o),
                    test_indices=self._outer.test_indices(o),
                    train_matrix=T,
                    test_matrix=S,
                )
            )
        return out

    def final_training_data(self) -> tuple[np.ndarray, list[tuple[str, str]]]:
        """The final ensemble training matrix and its column keys."""
        self._require_base("final_training_data")
        if not self.cv.runs_final:
            raise RuntimeError("final training data requires build_final mode")
        mods = self._assigned_in_order()
        T = np.hstack([self._blocks[m]["final_T"] for m in mods])
        return T, self.column_keys()

    @property
    def final_base_models_(self) -> dict[str, list[FittedBaseModel]]:
        self._require_base("final_base_models_")
        if not self.cv.runs_final:
            raise RuntimeError("final base models require build_final mode")
        return {m: list(self._blocks[m]["final_models"]) for m in self._assigned_in_order()}

    def _require_base(self, what: str):
        if not self._assignment:
            raise RuntimeError(f"{what} requires fit_base to have been called")

    def _require_coverage(self):
        if self.dataset is None:
            return  # restored pipelines are complete by construction
        missing = set(self.dataset.modality_names) - set(self._assignment)
        if missing:
            raise ValueError(
                f"fit_base has not covered modalities: {sorted(missing)}"
            )

    # -- ensemble stage --------------------------------------------------

    def fit_ensemble(self, ensembles: list[EnsembleSpec]) -> "EnsemblePipeline":
        """Train the given ensembles; replaces any previously trained set."""
        self._require_base("fit_ensemble")
        self._require_coverage()
        ids = [spec.id for spec in ensembles]
        if len(set(ids)) != len(ids):
            raise ValueError("ensemble ids must be unique")
        keys = self.column_keys()
        y = self.dataset.labels
        seed = self.cv.seed

        self.ensembles_ = {}
        self._ensemble_pooled = {}
        self._ensemble_summary = None
        self._ensemble_specs = list(ensembles)

        if self.cv.runs_evaluate:
            folds = self.outer_fold_data()
            for ei, spec in enumerate(ensembles):
                pooled = []
                for fd in folds:
                    model = train_ensemble(
                        spec, fd.train_matrix, y[fd.train_indices], keys,
                        derive_seed(seed, _TAG_ENSEMBLE, fd.fold + 1, ei),
                    )
                    pooled.append(apply_ensemble(model, fd.test_matrix))
                self._ensemble_pooled[spec.id] = np.concatenate(pooled)
            self._ensemble_summary = build_summary(
                self._ensemble_pooled, self._pooled_labels()
            )
        if self.cv.runs_final:
            final_T, _ = self.final_training_data()
            for ei, spec in enumerate(ensembles):
                self.ensembles_[spec.id] = train_ensemble(
                    spec, final_T, y, keys, derive_seed(seed, _TAG_ENSEMBLE, 0, ei)
                )
        return self

    # -- summaries ---------------------------------------------------------

    def _pooled_labels(self) -> np.ndarray:
        y = self.dataset.labels
        return np.concatenate(
            [y[self._outer.test_indices(o)] for o in range(self.cv.k_outer)]
        )

    def pooled_base_scores(self) -> dict[str, np.ndarray]:
        """Pooled outer-test scores per base predictor, keyed by name."""
        self._require_base("pooled_base_scores")
        if not self.cv.runs_evaluate:
            raise RuntimeError("pooled base scores require evaluate mode")
        pooled = {}
        for mod in self._assigned_in_order():
            block = self._blocks[mod]
            for li, spec in enumerate(self._assignment[mod]):
                pooled[f"{mod}.{spec.name}"] = np.concatenate(
                    [block["S"][o][:, li] for o in range(self.cv.k_outer)]
                )
        return pooled

    @property
    def base_summary(self) -> pd.DataFrame:
        """Metrics per base predictor over pooled outer-test scores."""
        return build_summary(self.pooled_base_scores(), self._pooled_labels())

    @property
    def ensemble_summary(self) -> pd.DataFrame:
        """Metrics per ensemble over pooled outer-test scores."""
        if self._ensemble_summary is None:
            raise RuntimeError(
                "ensemble_summary requires fit_ensemble in evaluate mode"
            )
        return self._ensemble_summary.copy()

    def summaries(self) -> tuple[pd.DataFrame, pd.DataFrame]:
        return self.base_summary, self.ensemble_summary

    # -- prediction ---------------------------------------------------------

    def predict(self, samples: dict[str, np.ndarray], ensemble_id: str) -> np.ndarray:
        """Score new samples (modality name -> feature matrix) with a final ensemble."""
        self._require_base("predict")
        if not self.cv.runs_final:
            raise RuntimeError("predict requires build_final mode")
        self._require_coverage()
        if ensemble_id not in self.ensembles_:
            raise ValueError(f"unknown ensemble_id {ensemble_id!r}")
        q = None
        for mod in self._assigned_in_order():
            if mod not in samples:
                raise ValueError(f"missing modality {mod!r}")
            X = np.asarray(samples[mod], dtype=np.float64)
            expected = len(self._modality_feature_names[mod])
            if X.ndim != 2 or X.shape[1] != expected:
                raise ValueError(
                    f"width mismatch for modality {mod!r}: expected {expected} columns"
                )
            if q is None:
                q = X.shape[0]
            elif X.shape[0] != q:
                raise ValueError("all modality matrices must have the same row count")
        columns = []
        for mod in self._assigned_in_order():
            X = np.asarray(samples[mod], dtype=np.float64)
            for model in self._blocks[mod]["final_models"]:
                columns.append(predict_proba(model, X))
        matrix = np.column_stack(columns)
        return apply_ensemble(self.ensembles_[ensemble_id], matrix)

    # -- restoration (used by the archive module) ---------------------------

    @classmethod
    def restore(
        cls,
        cv: CvConfig,
        assignment: dict[str, list[LearnerSpec]],
        modality_feature_names: dict[str, list[str]],
        final_models: dict[str, list[FittedBaseModel]],
        ensembles: dict[str, EnsembleModel],
        ensemble_summary: pd.DataFrame | None = None,
    ) -> "EnsemblePipeline":
        """Rebuild the final-model portion of a fitted pipeline."""
        pipe = cls(cv=CvConfig(cv.k_outer, cv.k_inner, cv.seed, "build_final"))
        pipe._assignment = {m: list(s) for m, s in assignment.items()}
        pipe._modality_feature_names = {
            m: list(v) for m, v in modality_feature_names.items()
        }
        pipe._blocks = {
            m: {"T": {}, "S": {}, "fold_models": {}, "final_T": None,
                "final_models": list(models)}
            for m, models in final_models.items()
        }
        pipe.ensembles_ = dict(ensembles)
        pipe._ensemble_summary = ensemble_summary
        return pipe

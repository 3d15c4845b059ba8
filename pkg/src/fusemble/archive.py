"""Versioned JSON persistence for the final-model portion of a pipeline.

The archive is a single self-describing UTF-8 JSON document.  Floats pass
through Python's shortest round-trip representation, so a loaded model
reproduces the saved model's predictions bit-for-bit.  Unknown extra
fields are ignored on load; missing required fields raise
:class:`ArchiveError` naming the offending path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .engine import CvConfig, EnsemblePipeline
from .ensembles import EnsembleModel, EnsembleSpec
from .learners import (
    FittedBaseModel,
    LearnerSpec,
    parameters_from_jsonable,
    parameters_to_jsonable,
)
from .metrics import SUMMARY_COLUMNS

FORMAT_VERSION = 1


class ArchiveError(ValueError):
    """Raised for unsupported versions, schema violations, or bad files."""


def _jsonable_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, (np.floating, np.integer)):
            out[key] = value.item()
        else:
            out[key] = value
    return out


def _model_to_json(model: FittedBaseModel) -> dict:
    return {
        "algorithm": model.spec.algorithm,
        "name": model.spec.name,
        "params": _jsonable_params(model.spec.params),
        "feature_count": int(model.feature_count),
        "parameters": parameters_to_jsonable(model),
    }


def _learner_spec_to_json(spec: LearnerSpec) -> dict:
    return {
        "algorithm": spec.algorithm,
        "name": spec.name,
        "params": _jsonable_params(spec.params),
    }


def _ensemble_spec_to_json(spec: EnsembleSpec) -> dict:
    return {
        "kind": spec.kind,
        "id": spec.id,
        "meta": None if spec.meta is None else _learner_spec_to_json(spec.meta),
        "metric": spec.metric,
        "bags": int(spec.bags),
        "max_iter": None if spec.max_iter is None else int(spec.max_iter),
    }


def save_model(pipe: EnsemblePipeline, path) -> None:
    """Write the final deployable model (base layer + ensembles) to ``path``."""
    if not pipe.cv.runs_final:
        raise ValueError("save_model requires a pipeline run in build_final or both mode")
    final_models = pipe.final_base_models_  # raises if fit_base incomplete
    if not pipe.ensembles_:
        raise ValueError("save_model requires fit_ensemble to have been called")

    summaries = {"base": None, "ensemble": None}
    if pipe.cv.runs_evaluate and pipe._assignment:
        try:
            summaries["base"] = pipe.base_summary.to_dict(orient="records")
            summaries["ensemble"] = pipe.ensemble_summary.to_dict(orient="records")
        except RuntimeError:
            pass
    document = {
        "format_version": FORMAT_VERSION,
        "cv": {
            "k_outer": pipe.cv.k_outer,
            "k_inner": pipe.cv.k_inner,
            "seed": int(pipe.cv.seed),
            "mode": pipe.cv.mode,
        },
        "modalities": [
            {"name": name, "feature_names": pipe._modality_feature_names[name]}
            for name in final_models
        ],
        "assignment": [
            {
                "modality": name,
                "learners": [_learner_spec_to_json(s) for s in pipe._assignment[name]],
            }
            for name in final_models
        ],
        "column_keys": [list(key) for key in pipe.column_keys()],
        "base_models": [
            {"modality": name, "models": [_model_to_json(m) for m in models]}
            for name, models in final_models.items()
        ],
        "ensembles": [
            {
                "id": eid,
                "spec": _ensemble_spec_to_json(model.spec),
                "stacker": None if model.stacker is None else _model_to_json(model.stacker),
                "selected": model.selected,
                "trace": model.trace,
            }
            for eid, model in pipe.ensembles_.items()
        ],
        "summaries": summaries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2)
        fh.write("\n")


def _need(obj, key, path):
    if not isinstance(obj, dict):
        raise ArchiveError(f"schema violation: {path} must be an object")
    if key not in obj:
        raise ArchiveError(f"schema violation: missing required field {path}.{key}")
    return obj[key]


def _model_from_json(raw, path) -> FittedBaseModel:
    algorithm = _need(raw, "algorithm", path)
    name = _need(raw, "name", path)
    params = _need(raw, "params", path)
    feature_count = _need(raw, "feature_count", path)
    parameters = _need(raw, "parameters", path)
    try:
        spec = LearnerSpec(algorithm, params=dict(params), name=name)
        learned = parameters_from_jsonable(algorithm, parameters)
    except (ValueError, KeyError, TypeError) as exc:
        raise ArchiveError(f"schema violation at {path}: {exc}") from None
    return FittedBaseModel(spec=spec, feature_count=int(feature_count), parameters=learned)


def _learner_spec_from_json(raw, path) -> LearnerSpec:
    try:
        return LearnerSpec(
            _need(raw, "algorithm", path),
            params=dict(_need(raw, "params", path)),
            name=_need(raw, "name", path),
        )
    except ValueError as exc:
        raise ArchiveError(f"schema violation at {path}: {exc}") from None


def _ensemble_spec_from_json(raw, path) -> EnsembleSpec:
    meta = _need(raw, "meta", path)
    try:
        return EnsembleSpec(
            kind=_need(raw, "kind", path),
            id=_need(raw, "id", path),
            meta=None if meta is None else _learner_spec_from_json(meta, f"{path}.meta"),
            metric=raw.get("metric", "auc"),
            bags=int(raw.get("bags", 10)),
            max_iter=raw.get("max_iter"),
        )
    except ValueError as exc:
        raise ArchiveError(f"schema violation at {path}: {exc}") from None


def load_model(path) -> EnsemblePipeline:
    """Load an archive; the result supports ``predict`` and carries summaries."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except FileNotFoundError:
        raise ArchiveError(f"missing file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: truncated or invalid JSON ({exc})") from None

    version = _need(document, "format_version", "archive")
    if version != FORMAT_VERSION:
        raise ArchiveError(
            f"unsupported version: {version} (this build reads version {FORMAT_VERSION})"
        )
    raw_cv = _need(document, "cv", "archive")
    cv = CvConfig(
        k_outer=int(_need(raw_cv, "k_outer", "archive.cv")),
        k_inner=int(_need(raw_cv, "k_inner", "archive.cv")),
        seed=int(_need(raw_cv, "seed", "archive.cv")),
        mode="build_final",
    )
    feature_names = {}
    for i, entry in enumerate(_need(document, "modalities", "archive")):
        prefix = f"archive.modalities[{i}]"
        feature_names[_need(entry, "name", prefix)] = list(
            _need(entry, "feature_names", prefix)
        )
    assignment = {}
    for i, entry in enumerate(_need(document, "assignment", "archive")):
        prefix = f"archive.assignment[{i}]"
        name = _need(entry, "modality", prefix)
        assignment[name] = [
            _learner_spec_from_json(raw, f"{prefix}.learners[{j}]")
            for j, raw in enumerate(_need(entry, "learners", prefix))
        ]
    column_keys = [tuple(key) for key in _need(document, "column_keys", "archive")]
    final_models = {}
    for i, entry in enumerate(_need(document, "base_models", "archive")):
        prefix = f"archive.base_models[{i}]"
        name = _need(entry, "modality", prefix)
        final_models[name] = [
            _model_from_json(raw, f"{prefix}.models[{j}]")
            for j, raw in enumerate(_need(entry, "models", prefix))
        ]
    ensembles = {}
    for i, entry in enumerate(_need(document, "ensembles", "archive")):
        prefix = f"archive.ensembles[{i}]"
        eid = _need(entry, "id", prefix)
        spec = _ensemble_spec_from_json(_need(entry, "spec", prefix), f"{prefix}.spec")
        stacker_raw = _need(entry, "stacker", prefix)
        selected = _need(entry, "selected", prefix)
        ensembles[eid] = EnsembleModel(
            spec=spec,
            column_keys=list(column_keys),
            stacker=None if stacker_raw is None
            else _model_from_json(stacker_raw, f"{prefix}.stacker"),
            selected=None if selected is None else [int(s) for s in selected],
            trace=entry.get("trace"),
        )
    summary = None
    raw_summaries = document.get("summaries") or {}
    if raw_summaries.get("ensemble") is not None:
        summary = pd.DataFrame(raw_summaries["ensemble"], columns=SUMMARY_COLUMNS)
    pipe = EnsemblePipeline.restore(
        cv=cv,
        assignment=assignment,
        modality_feature_names=feature_names,
        final_models=final_models,
        ensembles=ensembles,
        ensemble_summary=summary,
    )
    pipe._archived_base_summary = (
        pd.DataFrame(raw_summaries["base"], columns=SUMMARY_COLUMNS)
        if raw_summaries.get("base") is not None
        else None
    )
    return pipe

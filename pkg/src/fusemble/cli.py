"""Command-line front end.

Subcommands::

    synth      write a synthetic multi-modal dataset + manifest from a spec file
    evaluate   nested-CV evaluation only; writes base/ensemble summary CSVs
    train      evaluate + build the final model; writes summaries + model archive
    predict    load an archive and score a manifest-described feature set
    interpret  load an archive + training data and write a feature ranking CSV

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 training
failure.  All output tables are CSV with headers, LF line endings, UTF-8,
and full-precision floats; identical config + seed yields byte-identical
artifacts regardless of ``--workers``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .archive import ArchiveError, load_model, save_model
from .data import (
    ManifestError,
    ModalitySynthSpec,
    SyntheticSpec,
    generate_synthetic,
    load_feature_set,
    load_manifest,
    write_manifest,
)
from .engine import CvConfig, EnsemblePipeline
from .ensembles import EnsembleSpec, default_ensembles
from .interpret import interpret
from .learners import LearnerSpec, TrainingError, default_learners


class ConfigError(ValueError):
    """Raised when a run configuration file is invalid."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _default_workers() -> int:
    raw = os.environ.get("EI_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _read_json(path, kind: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"missing {kind} file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _synthetic_spec_from(raw: dict) -> SyntheticSpec:
    try:
        modalities = tuple(
            ModalitySynthSpec(
                n_features=int(m["n_features"]),
                n_informative=int(m.get("n_informative", 0)),
                noise_std=float(m.get("noise_std", 1.0)),
            )
            for m in raw["modalities"]
        )
        return SyntheticSpec(
            n=int(raw["n"]),
            modality_specs=modalities,
            complementarity=float(raw.get("complementarity", 0.0)),
            seed=int(raw.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid synthetic spec: {exc}") from None


def _learner_from(raw: dict) -> LearnerSpec:
    try:
        return LearnerSpec(
            raw["algorithm"], params=dict(raw.get("params", {})),
            name=raw.get("name", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid learner spec: {exc}") from None


def _ensemble_from(raw: dict) -> EnsembleSpec:
    try:
        meta = raw.get("meta")
        return EnsembleSpec(
            kind=raw["kind"],
            id=raw.get("id", raw["kind"]),
            meta=None if meta is None else _learner_from(meta),
            metric=raw.get("metric", "auc"),
            bags=int(raw.get("bags", 10)),
            max_iter=raw.get("max_iter"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid ensemble spec: {exc}") from None


def _load_run_config(args) -> dict:
    config = _read_json(args.config, "config") if args.config else {}
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    has_manifest = "manifest" in config
    has_synth = "synthetic" in config
    if has_manifest and has_synth:
        raise ConfigError("config must name exactly one data source, not both")
    if not has_manifest and not has_synth:
        raise ConfigError("config needs a data source: 'manifest' or 'synthetic'")
    return config


def _resolve_dataset(config, config_path):
    if "manifest" in config:
        manifest_path = Path(config["manifest"])
        if not manifest_path.is_absolute() and config_path is not None:
            manifest_path = Path(config_path).parent / manifest_path
        return load_manifest(manifest_path)
    return generate_synthetic(_synthetic_spec_from(config["synthetic"]))


def _resolve_assignment(config, dataset):
    if "assignment" in config:
        raw = config["assignment"]
        if not isinstance(raw, dict):
            raise ConfigError("'assignment' must map modality name to learner list")
        return {mod: [_learner_from(l) for l in specs] for mod, specs in raw.items()}
    if "learners" in config:
        return [_learner_from(l) for l in config["learners"]]
    return default_learners()


def _resolve_ensembles(config):
    if "ensembles" in config:
        return [_ensemble_from(e) for e in config["ensembles"]]
    return default_ensembles()


def _resolve_cv(config, args, mode: str) -> CvConfig:
    raw = dict(config.get("cv", {}))
    if getattr(args, "k_outer", None) is not None:
        raw["k_outer"] = args.k_outer
    if getattr(args, "k_inner", None) is not None:
        raw["k_inner"] = args.k_inner
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    try:
        return CvConfig(
            k_outer=int(raw.get("k_outer", 5)),
            k_inner=int(raw.get("k_inner", 5)),
            seed=int(raw.get("seed", 0)),
            mode=mode,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_out_dir(config, args) -> Path:
    out = getattr(args, "out_dir", None) or config.get("out_dir") or "."
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summaries(pipe, out_dir: Path) -> list[Path]:
    paths = []
    for name, frame in (
        ("base_summary.csv", pipe.base_summary),
        ("ensemble_summary.csv", pipe.ensemble_summary),
    ):
        path = out_dir / name
        frame.to_csv(path, index=False, lineterminator="\n")
        paths.append(path)
    return paths


def _run_pipeline(config, args, mode: str) -> tuple[EnsemblePipeline, Path]:
    dataset = _resolve_dataset(config, args.config)
    cv = _resolve_cv(config, args, mode)
    pipe = EnsemblePipeline(cv=cv, workers=args.workers)
    pipe.fit_base(dataset, _resolve_assignment(config, dataset))
    pipe.fit_ensemble(_resolve_ensembles(config))
    return pipe, _resolve_out_dir(config, args)


def _cmd_synth(args) -> int:
    spec = _synthetic_spec_from(_read_json(args.spec, "synthetic spec"))
    dataset = generate_synthetic(spec)
    manifest = write_manifest(dataset, args.out_dir)
    print(f"wrote {manifest}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_run_config(args)
    pipe, out_dir = _run_pipeline(config, args, "evaluate")
    for path in _write_summaries(pipe, out_dir):
        print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    config = _load_run_config(args)
    pipe, out_dir = _run_pipeline(config, args, "both")
    for path in _write_summaries(pipe, out_dir):
        print(f"wrote {path}")
    model_path = out_dir / "model.json"
    save_model(pipe, model_path)
    print(f"wrote {model_path}")
    return 0


def _pick_ensemble(pipe, requested: str | None) -> str:
    if requested is not None:
        if requested not in pipe.ensembles_:
            raise ConfigError(f"unknown ensemble id {requested!r}")
        return requested
    summary = getattr(pipe, "_ensemble_summary", None)
    if summary is not None and len(summary):
        return str(summary.iloc[0]["name"])
    if len(pipe.ensembles_) == 1:
        return next(iter(pipe.ensembles_))
    raise ConfigError(
        "archive carries no evaluation summary; choose an ensemble with --ensemble"
    )


def _cmd_predict(args) -> int:
    pipe = load_model(args.model)
    ensemble_id = _pick_ensemble(pipe, args.ensemble)
    sample_ids, features = load_feature_set(args.manifest)
    scores = pipe.predict(features, ensemble_id)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "predictions.csv"
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "score"])
        for sid, score in zip(sample_ids, scores):
            writer.writerow([sid, repr(float(score))])
    print(f"wrote {path}")
    return 0


def _cmd_interpret(args) -> int:
    archived = load_model(args.model)
    manifest = args.manifest
    options = {}
    if args.config:
        config = _read_json(args.config, "config")
        options = dict(config.get("interpret", {}))
        if manifest is None and "manifest" in config:
            path = Path(config["manifest"])
            if not path.is_absolute():
                path = Path(args.config).parent / path
            manifest = path
    if manifest is None:
        raise ConfigError("interpret needs --manifest (or a config with one)")
    dataset = load_manifest(manifest)

    # Rebuild the final model deterministically from the archived recipe so
    # the out-of-fold ensemble training matrix is available for importance.
    cv = CvConfig(
        archived.cv.k_outer, archived.cv.k_inner, archived.cv.seed, "build_final"
    )
    pipe = EnsemblePipeline(cv=cv, workers=args.workers)
    pipe.fit_base(dataset, {m: list(s) for m, s in archived._assignment.items()})
    pipe.fit_ensemble([model.spec for model in archived.ensembles_.values()])

    ensemble_id = _pick_ensemble(archived, args.ensemble or options.get("ensemble"))
    metric = args.metric or options.get("metric", "auc")
    n_repeats = args.n_repeats if args.n_repeats is not None else int(options.get("n_repeats", 10))
    seed = args.seed if args.seed is not None else int(options.get("seed", 0))
    ranking = interpret(pipe, ensemble_id, metric=metric, n_repeats=n_repeats, seed=seed)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "feature_ranking.csv"
    ranking.to_csv(path, index=False, lineterminator="\n")
    print(f"wrote {path}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="fusemble", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset + manifest")
    p.add_argument("--spec", required=True, help="synthetic spec JSON file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    for name, func in (("evaluate", _cmd_evaluate), ("train", _cmd_train)):
        p = sub.add_parser(name, help=f"{name} a run configuration")
        p.add_argument("--config", required=True, help="run config JSON file")
        p.add_argument("--k-outer", type=int)
        p.add_argument("--k-inner", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--workers", type=int, default=_default_workers())
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="score a feature set with a saved model")
    p.add_argument("--model", required=True, help="model archive JSON")
    p.add_argument("--manifest", required=True, help="manifest of feature CSVs")
    p.add_argument("--ensemble", help="ensemble id (default: best by archived AUC)")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("interpret", help="rank features of a saved model")
    p.add_argument("--model", required=True, help="model archive JSON")
    p.add_argument("--manifest", help="manifest of the training data")
    p.add_argument("--config", help="run config JSON (manifest + interpret options)")
    p.add_argument("--ensemble")
    p.add_argument("--metric", choices=["auc", "fmax"])
    p.add_argument("--n-repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=_cmd_interpret)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return 3
    except (ManifestError, ArchiveError, ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

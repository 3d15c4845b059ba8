"""Multi-modal dataset representation, manifest I/O, folds, synthetic data.

A dataset is an ordered list of per-modality feature matrices sharing one
sample axis, plus binary labels.  Alignment across files is by explicit
sample ID, never by row position.  Datasets are treated as immutable once
constructed; all operations here are pure functions of their inputs.

On-disk layout (see :func:`load_manifest` / :func:`write_manifest`):

* manifest: UTF-8 JSON with keys ``modalities`` (array of ``{name, path}``),
  ``labels_path``, optional ``id_column`` (default ``"id"``) and
  ``label_column`` (default ``"label"``).  Relative paths resolve against
  the manifest's directory.
* modality CSV: header row is the id column followed by feature names,
  one row per sample; values parsed as 64-bit floats.
* labels CSV: header is the id column and the label column; labels parsed
  as integers and must be 0 or 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ManifestError(ValueError):
    """Raised when a manifest or one of its referenced files is invalid."""


@dataclass
class ModalityMatrix:
    name: str
    features: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError(f"modality {self.name!r}: features must be 2-D")
        if self.features.shape[1] != len(self.feature_names):
            raise ValueError(
                f"modality {self.name!r}: {self.features.shape[1]} columns but "
                f"{len(self.feature_names)} feature names"
            )


@dataclass
class MultiModalDataset:
    modalities: list[ModalityMatrix]
    labels: np.ndarray
    sample_ids: list[str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError("labels must be 1-D")
        if len(self.sample_ids) != self.labels.size:
            raise ValueError("sample_ids and labels must have equal length")

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def modality_names(self) -> list[str]:
        return [m.name for m in self.modalities]

    def modality(self, name: str) -> ModalityMatrix:
        for m in self.modalities:
            if m.name == name:
                return m
        raise KeyError(f"no modality named {name!r}")

    @property
    def total_features(self) -> int:
        return sum(m.features.shape[1] for m in self.modalities)


@dataclass(frozen=True)
class Violation:
    """One dataset invariant violation; row/column are 0-based where known."""

    code: str
    message: str
    modality: str | None = None
    row: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = ""
        if self.modality is not None:
            where = f" [modality={self.modality!r}"
            if self.row is not None:
                where += f", row={self.row}"
            if self.column is not None:
                where += f", col={self.column}"
            where += "]"
        return f"{self.code}: {self.message}{where}"


def validate_dataset(ds: MultiModalDataset) -> list[Violation]:
    """Enumerate every invariant violation; an empty list means valid."""
    report: list[Violation] = []
    n = ds.n_samples
    if len(ds.modalities) < 1:
        report.append(Violation("no-modalities", "dataset has no modalities"))
    names = [m.name for m in ds.modalities]
    for name in names:
        if not name:
            report.append(Violation("empty-modality-name", "modality name is empty"))
    dup = {x for x in names if names.count(x) > 1}
    for name in sorted(dup):
        report.append(
            Violation("duplicate-modality-name", f"modality name {name!r} repeats")
        )
    if len(set(ds.sample_ids)) != len(ds.sample_ids):
        seen, dups = set(), []
        for s in ds.sample_ids:
            if s in seen:
                dups.append(s)
            seen.add(s)
        report.append(
            Violation("duplicate-sample-ids", f"duplicate sample IDs: {sorted(set(dups))}")
        )
    values = np.unique(ds.labels)
    if not np.isin(values, (0, 1)).all():
        report.append(
            Violation("label-values", "labels contain values outside {0, 1}")
        )
    elif values.size < 2:
        report.append(
            Violation("single-class-labels", "labels contain only one class")
        )
    for m in ds.modalities:
        if m.features.shape[0] != n:
            report.append(
                Violation(
                    "row-count-mismatch",
                    f"{m.features.shape[0]} rows, expected {n}",
                    modality=m.name,
                )
            )
        if m.features.shape[1] < 1:
            report.append(
                Violation("no-features", "modality has no feature columns", modality=m.name)
            )
        if len(set(m.feature_names)) != len(m.feature_names):
            report.append(
                Violation("duplicate-feature-names", "feature names repeat", modality=m.name)
            )
        bad = ~np.isfinite(m.features)
        for r, c in zip(*np.nonzero(bad)):
            report.append(
                Violation(
                    "non-finite-value",
                    "feature cell is NaN or infinite",
                    modality=m.name,
                    row=int(r),
                    column=int(c),
                )
            )
    return report


# ---------------------------------------------------------------------------
# manifest I/O
# ---------------------------------------------------------------------------


def _read_csv_rows(path: Path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ManifestError(f"missing file: {path}") from None
    if not rows:
        raise ManifestError(f"empty CSV file: {path}")
    width = len(rows[0])
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise ManifestError(f"{path}: row {i} has {len(row)} cells, expected {width}")
    return rows


def _load_labels(path: Path, id_column: str, label_column: str):
    rows = _read_csv_rows(path)
    header = rows[0]
    if id_column not in header or label_column not in header:
        raise ManifestError(
            f"{path}: labels header must contain {id_column!r} and {label_column!r}"
        )
    id_pos = header.index(id_column)
    label_pos = header.index(label_column)
    ids, labels = [], []
    for i, row in enumerate(rows[1:], start=1):
        ids.append(row[id_pos])
        try:
            value = int(row[label_pos])
        except ValueError:
            raise ManifestError(
                f"{path}: row {i}: label {row[label_pos]!r} is not an integer"
            ) from None
        if value not in (0, 1):
            raise ManifestError(f"{path}: row {i}: label {value} outside {{0, 1}}")
        labels.append(value)
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate sample IDs in labels file")
    return ids, np.asarray(labels, dtype=np.int64)


def _load_modality(path: Path, name: str, id_column: str, sample_ids: list[str]):
    rows = _read_csv_rows(path)
    header = rows[0]
    if not header or header[0] != id_column:
        raise ManifestError(f"{path}: first header column must be {id_column!r}")
    feature_names = header[1:]
    if not feature_names:
        raise ManifestError(f"{path}: modality {name!r} has no feature columns")
    by_id: dict[str, np.ndarray] = {}
    for i, row in enumerate(rows[1:], start=1):
        sid = row[0]
        if sid in by_id:
            raise ManifestError(f"{path}: duplicate sample ID {sid!r}")
        values = np.empty(len(feature_names))
        for j, cell in enumerate(row[1:]):
            try:
                values[j] = float(cell)
            except ValueError:
                raise ManifestError(
                    f"{path}: non-numeric value {cell!r} in modality {name!r} "
                    f"(row {i}, column {feature_names[j]!r})"
                ) from None
        by_id[sid] = values
    missing = [sid for sid in sample_ids if sid not in by_id]
    if missing:
        raise ManifestError(
            f"modality/label sample mismatch: modality {name!r} is missing "
            f"IDs {missing[:5]}{'...' if len(missing) > 5 else ''}"
        )
    features = np.vstack([by_id[sid] for sid in sample_ids])
    return ModalityMatrix(name=name, features=features, feature_names=feature_names)


def load_manifest(path) -> MultiModalDataset:
    """Load and validate a multi-modal dataset described by a manifest file.

    Row order follows the labels file; each modality's rows are re-aligned
    to the label sample IDs (extra rows in a modality file are dropped).
    Raises :class:`ManifestError` on any structural or validity problem.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"missing file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict) or "modalities" not in manifest:
        raise ManifestError(f"{path}: manifest must be an object with 'modalities'")
    if "labels_path" not in manifest:
        raise ManifestError(f"{path}: manifest is missing 'labels_path'")
    id_column = manifest.get("id_column", "id")
    label_column = manifest.get("label_column", "label")
    base = path.parent

    sample_ids, labels = _load_labels(
        base / manifest["labels_path"], id_column, label_column
    )
    modalities = []
    for entry in manifest["modalities"]:
        if "name" not in entry or "path" not in entry:
            raise ManifestError(f"{path}: each modality needs 'name' and 'path'")
        modalities.append(
            _load_modality(base / entry["path"], entry["name"], id_column, sample_ids)
        )
    ds = MultiModalDataset(modalities=modalities, labels=labels, sample_ids=sample_ids)
    report = validate_dataset(ds)
    if report:
        details = "; ".join(str(v) for v in report[:10])
        raise ManifestError(f"invalid dataset: {details}")
    for m in ds.modalities:
        m.features.flags.writeable = False
    return ds


def load_feature_set(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Load only the modality matrices named by a manifest, for prediction.

    Returns ``(sample_ids, {modality name: feature matrix})``.  When the
    manifest has a ``labels_path`` the label file fixes the row order;
    otherwise the first modality's row order is used and the remaining
    modalities are aligned to it by sample ID.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"missing file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict) or not manifest.get("modalities"):
        raise ManifestError(f"{path}: manifest must list at least one modality")
    id_column = manifest.get("id_column", "id")
    base = path.parent
    sample_ids: list[str] | None = None
    if manifest.get("labels_path"):
        sample_ids, _ = _load_labels(
            base / manifest["labels_path"], id_column,
            manifest.get("label_column", "label"),
        )
    features: dict[str, np.ndarray] = {}
    for entry in manifest["modalities"]:
        if "name" not in entry or "path" not in entry:
            raise ManifestError(f"{path}: each modality needs 'name' and 'path'")
        if sample_ids is None:
            rows = _read_csv_rows(base / entry["path"])
            sample_ids = [row[0] for row in rows[1:]]
            if len(set(sample_ids)) != len(sample_ids):
                raise ManifestError(f"{entry['path']}: duplicate sample IDs")
        modality = _load_modality(base / entry["path"], entry["name"], id_column, sample_ids)
        features[entry["name"]] = modality.features
    return sample_ids, features


def _format_float(v: float) -> str:
    return repr(float(v))


def write_manifest(ds: MultiModalDataset, out_dir, manifest_name="manifest.json") -> Path:
    """Write one CSV per modality plus a labels CSV and a manifest JSON.

    Floats are written with shortest round-trip precision, so loading the
    manifest back reproduces identical values and ordering.  Returns the
    manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, m in enumerate(ds.modalities):
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in m.name)
        filename = f"modality_{i}_{safe}.csv"
        with open(out_dir / filename, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", *m.feature_names])
            for sid, row in zip(ds.sample_ids, m.features):
                writer.writerow([sid, *[_format_float(v) for v in row]])
        entries.append({"name": m.name, "path": filename})
    with open(out_dir / "labels.csv", "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"])
        for sid, label in zip(ds.sample_ids, ds.labels):
            writer.writerow([sid, str(int(label))])
    manifest = {
        "modalities": entries,
        "labels_path": "labels.csv",
        "id_column": "id",
        "label_column": "label",
    }
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


# ---------------------------------------------------------------------------
# stratified folds
# ---------------------------------------------------------------------------


@dataclass
class FoldAssignment:
    """Partition of sample indices into k folds, stratified by class."""

    k: int
    fold_of: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def stratified_k_fold(labels, k: int, seed: int) -> FoldAssignment:
    """Deterministic stratified partition: per-class class counts differ by
    at most 1 across folds.

    Shuffles indices within each class with the seeded generator, then
    deals them round-robin into the k folds.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must contain only 0 and 1")
    counts = [int(np.count_nonzero(labels == c)) for c in (0, 1)]
    if min(counts) < k:
        raise ValueError(
            f"class count {min(counts)} is smaller than k={k}; cannot stratify"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    fold_of = np.empty(labels.size, dtype=np.int64)
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        fold_of[perm] = np.arange(perm.size) % k
    return FoldAssignment(k=k, fold_of=fold_of)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModalitySynthSpec:
    """Per-modality shape: total features, informative count, noise level."""

    n_features: int
    n_informative: int
    noise_std: float


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic multi-modal dataset.

    ``complementarity`` in [0, 1] controls how the label signal is split
    across modalities: that fraction of the samples is dealt round-robin
    into per-modality exclusive blocks, and a modality's informative
    features carry the class-mean shift only on its own block plus the
    shared remainder.  At 0 every modality sees the full signal; at 1 the
    signal is disjoint and no single modality can separate all samples.
    """

    n: int
    modality_specs: tuple[ModalitySynthSpec, ...]
    complementarity: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modality_specs", tuple(self.modality_specs))
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if not self.modality_specs:
            raise ValueError("at least one modality spec is required")
        if not 0.0 <= self.complementarity <= 1.0:
            raise ValueError("complementarity must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative 64-bit integer")
        for ms in self.modality_specs:
            if ms.n_features < 1:
                raise ValueError("each modality needs at least one feature")
            if not 0 <= ms.n_informative <= ms.n_features:
                raise ValueError("n_informative must lie in [0, n_features]")
            if ms.noise_std < 0:
                raise ValueError("noise_std must be nonnegative")


def generate_synthetic(spec: SyntheticSpec) -> MultiModalDataset:
    """Generate a dataset per ``spec``; bit-identical for identical specs.

    Labels are balanced (counts differ by at most 1).  Informative columns
    are the first ``n_informative`` of each modality and are Gaussian with
    class means -1/+1 (separation 2.0) where the modality is active, times
    the per-modality ``noise_std``; the remaining columns are standard
    Gaussians.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n
    m = len(spec.modality_specs)
    y = np.zeros(n, dtype=np.int64)
    y[: n // 2] = 1
    y = rng.permutation(y)

    order = rng.permutation(n)
    n_exclusive = int(round(spec.complementarity * n))
    owner = np.full(n, -1, dtype=np.int64)  # -1 = shared across modalities
    owner[order[:n_exclusive]] = np.arange(n_exclusive) % m

    signs = (2 * y - 1).astype(np.float64)
    modalities = []
    for i, ms in enumerate(spec.modality_specs):
        X = rng.standard_normal((n, ms.n_features))
        if ms.n_informative:
            active = (owner == -1) | (owner == i)
            X[:, : ms.n_informative] *= ms.noise_std
            X[:, : ms.n_informative] += (signs * active)[:, None]
        name = f"m{i}"
        feature_names = [f"{name}_x{j}" for j in range(ms.n_features)]
        modalities.append(
            ModalityMatrix(name=name, features=X, feature_names=feature_names)
        )
    width = len(str(n - 1))
    sample_ids = [f"s{j:0{width}d}" for j in range(n)]
    ds = MultiModalDataset(modalities=modalities, labels=y, sample_ids=sample_ids)
    for mod in ds.modalities:
        mod.features.flags.writeable = False
    return ds

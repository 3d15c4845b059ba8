import json

import numpy as np
import pytest

from fusemble.data import (
    ManifestError,
    ModalityMatrix,
    ModalitySynthSpec,
    MultiModalDataset,
    SyntheticSpec,
    generate_synthetic,
    load_feature_set,
    load_manifest,
    stratified_k_fold,
    validate_dataset,
    write_manifest,
)
from fusemble.learners import LearnerSpec, fit_learner, predict_proba
from fusemble.metrics import roc_auc


def small_dataset(n=6):
    rng = np.random.default_rng(0)
    labels = np.array([0, 1] * (n // 2))
    mods = [
        ModalityMatrix("alpha", rng.standard_normal((n, 3)), ["a0", "a1", "a2"]),
        ModalityMatrix("beta", rng.standard_normal((n, 2)), ["b0", "b1"]),
    ]
    ids = [f"id{i}" for i in range(n)]
    return MultiModalDataset(mods, labels, ids)


class TestValidation:
    def test_well_formed_dataset_passes(self):
        assert validate_dataset(small_dataset()) == []

    def test_nan_cell_reported_with_location(self):
        ds = small_dataset()
        features = ds.modalities[0].features.copy()
        features[3, 2] = np.nan
        ds.modalities[0].features = features
        report = validate_dataset(ds)
        assert len(report) == 1
        v = report[0]
        assert v.code == "non-finite-value"
        assert (v.modality, v.row, v.column) == ("alpha", 3, 2)

    def test_single_class_labels_reported(self):
        ds = small_dataset()
        ds.labels = np.ones(6, dtype=np.int64)
        codes = [v.code for v in validate_dataset(ds)]
        assert "single-class-labels" in codes

    def test_duplicate_ids_and_row_mismatch(self):
        ds = small_dataset()
        ds.sample_ids = ["x"] * 6
        ds.modalities[1].features = ds.modalities[1].features[:4]
        codes = [v.code for v in validate_dataset(ds)]
        assert "duplicate-sample-ids" in codes
        assert "row-count-mismatch" in codes


class TestManifestRoundTrip:
    def test_round_trip_identical(self, tmp_path):
        ds = small_dataset()
        manifest = write_manifest(ds, tmp_path)
        loaded = load_manifest(manifest)
        assert loaded.sample_ids == ds.sample_ids
        assert np.array_equal(loaded.labels, ds.labels)
        assert loaded.modality_names == ds.modality_names
        for original, reread in zip(ds.modalities, loaded.modalities):
            assert reread.feature_names == original.feature_names
            assert np.array_equal(reread.features, original.features)

    def test_four_modalities_95_features(self, tmp_path):
        rng = np.random.default_rng(1)
        widths = [24, 25, 23, 23]  # sums to 95
        n = 8
        mods = [
            ModalityMatrix(
                f"group{i}",
                rng.standard_normal((n, w)),
                [f"g{i}_v{j}" for j in range(w)],
            )
            for i, w in enumerate(widths)
        ]
        labels = np.array([0, 1] * (n // 2))
        ds = MultiModalDataset(mods, labels, [f"p{i}" for i in range(n)])
        loaded = load_manifest(write_manifest(ds, tmp_path))
        assert len(loaded.modalities) == 4
        assert loaded.total_features == 95

    def test_minimal_manifest(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nA,1.0\nB,2.0\nC,3.0\nD,4.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        ds = load_manifest(tmp_path / "manifest.json")
        assert len(ds.modalities) == 1
        assert ds.n_samples == 4
        assert list(ds.labels) == [0, 1, 0, 1]

    def test_rows_aligned_by_id_not_position(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nD,4.0\nC,3.0\nB,2.0\nA,1.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        ds = load_manifest(tmp_path / "manifest.json")
        assert ds.sample_ids == ["A", "B", "C", "D"]
        assert list(ds.modalities[0].features[:, 0]) == [1.0, 2.0, 3.0, 4.0]

    def test_missing_sample_id_rejected(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nA,1.0\nB,2.0\nC,3.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        with pytest.raises(ManifestError, match="modality/label sample mismatch"):
            load_manifest(tmp_path / "manifest.json")

    def test_non_numeric_cell_rejected(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nA,1.0\nB,oops\nC,3.0\nD,4.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        with pytest.raises(ManifestError, match="non-numeric"):
            load_manifest(tmp_path / "manifest.json")

    def test_bad_label_rejected(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nA,1.0\nB,2.0\nC,3.0\nD,4.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,2\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        with pytest.raises(ManifestError, match="outside"):
            load_manifest(tmp_path / "manifest.json")

    def test_duplicate_ids_rejected(self, tmp_path):
        (tmp_path / "m.csv").write_text("id,x\nA,1.0\nA,2.0\nC,3.0\nD,4.0\n")
        (tmp_path / "y.csv").write_text("id,label\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({"modalities": [{"name": "only", "path": "m.csv"}],
                        "labels_path": "y.csv"})
        )
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(tmp_path / "manifest.json")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="missing file"):
            load_manifest(tmp_path / "nope.json")

    def test_feature_set_without_labels(self, tmp_path):
        ds = small_dataset()
        manifest = write_manifest(ds, tmp_path)
        raw = json.loads(manifest.read_text())
        del raw["labels_path"]
        stripped = tmp_path / "predict_manifest.json"
        stripped.write_text(json.dumps(raw))
        ids, features = load_feature_set(stripped)
        assert ids == ds.sample_ids
        assert set(features) == {"alpha", "beta"}
        assert np.array_equal(features["alpha"], ds.modalities[0].features)


class TestStratifiedKFold:
    def test_balanced_8_samples(self):
        labels = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        folds = stratified_k_fold(labels, k=2, seed=0)
        for f in range(2):
            te = folds.test_indices(f)
            assert np.count_nonzero(labels[te] == 1) == 2
            assert np.count_nonzero(labels[te] == 0) == 2

    def test_unbalanced_counts_within_one(self):
        labels = np.array([1, 1, 1, 1, 1, 0, 0, 0])
        folds = stratified_k_fold(labels, k=2, seed=3)
        pos = sorted(
            int(np.count_nonzero(labels[folds.test_indices(f)] == 1)) for f in range(2)
        )
        neg = sorted(
            int(np.count_nonzero(labels[folds.test_indices(f)] == 0)) for f in range(2)
        )
        assert pos == [2, 3]
        assert neg == [1, 2]

    def test_deterministic(self):
        labels = np.array([0, 1] * 10)
        a = stratified_k_fold(labels, k=4, seed=42)
        b = stratified_k_fold(labels, k=4, seed=42)
        assert np.array_equal(a.fold_of, b.fold_of)

    def test_partition_and_stratification_properties(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(10, 60))
            labels = rng.integers(0, 2, n)
            k = int(rng.integers(2, 5))
            if min(np.count_nonzero(labels == 0), np.count_nonzero(labels == 1)) < k:
                continue
            folds = stratified_k_fold(labels, k, int(rng.integers(0, 1000)))
            seen = np.concatenate([folds.test_indices(f) for f in range(k)])
            assert sorted(seen.tolist()) == list(range(n))
            for cls in (0, 1):
                counts = [
                    int(np.count_nonzero(labels[folds.test_indices(f)] == cls))
                    for f in range(k)
                ]
                assert max(counts) - min(counts) <= 1
                assert min(len(folds.test_indices(f)) for f in range(k)) > 0

    def test_small_class_rejected(self):
        with pytest.raises(ValueError, match="smaller than k"):
            stratified_k_fold(np.array([0, 0, 0, 1, 1]), k=3, seed=0)


class TestSyntheticGeneration:
    def test_deterministic(self):
        spec = SyntheticSpec(20, (ModalitySynthSpec(4, 2, 0.5),), 0.5, seed=11)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert np.array_equal(a.labels, b.labels)
        for ma, mb in zip(a.modalities, b.modalities):
            assert np.array_equal(ma.features, mb.features)

    def test_labels_balanced(self):
        for n in (8, 9, 31):
            ds = generate_synthetic(SyntheticSpec(n, (ModalitySynthSpec(2, 0, 1.0),), 0.0, 4))
            pos = int(ds.labels.sum())
            assert abs(pos - (n - pos)) <= 1

    def test_no_signal_when_uninformative(self):
        # informative=0: held-out AUC over seeds hovers at chance
        aucs = []
        for seed in range(20):
            ds = generate_synthetic(
                SyntheticSpec(80, (ModalitySynthSpec(2, 0, 1.0),), 0.0, seed)
            )
            X = ds.modalities[0].features
            train, test = np.arange(0, 40), np.arange(40, 80)
            model = fit_learner(LearnerSpec("gnb"), X[train], ds.labels[train], 0)
            aucs.append(roc_auc(predict_proba(model, X[test]), ds.labels[test]))
        assert 0.4 < float(np.mean(aucs)) < 0.6

    def test_complementary_signal_needs_both_modalities(self):
        # two modalities, fully complementary: concatenation beats either alone
        spec = SyntheticSpec(
            200,
            (ModalitySynthSpec(5, 2, 0.5), ModalitySynthSpec(5, 2, 0.5)),
            complementarity=1.0,
            seed=1,
        )
        ds = generate_synthetic(spec)
        train = np.arange(0, 140)
        test = np.arange(140, 200)
        y = ds.labels

        def auc_of(X):
            model = fit_learner(LearnerSpec("logistic"), X[train], y[train], 0)
            return roc_auc(predict_proba(model, X[test]), y[test])

        x0 = ds.modalities[0].features
        x1 = ds.modalities[1].features
        both = np.hstack([x0, x1])
        assert auc_of(both) > auc_of(x0)
        assert auc_of(both) > auc_of(x1)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(3, (ModalitySynthSpec(2, 0, 1.0),), 0.0, 0)
        with pytest.raises(ValueError):
            SyntheticSpec(10, (ModalitySynthSpec(2, 3, 1.0),), 0.0, 0)
        with pytest.raises(ValueError):
            SyntheticSpec(10, (ModalitySynthSpec(2, 1, 1.0),), 1.5, 0)


class TestCustomManifestColumns:
    def test_custom_id_and_label_columns(self, tmp_path):
        (tmp_path / "m.csv").write_text("subject,x\nA,1.0\nB,2.0\nC,3.0\nD,4.0\n")
        (tmp_path / "y.csv").write_text("subject,outcome\nA,0\nB,1\nC,0\nD,1\n")
        (tmp_path / "manifest.json").write_text(
            json.dumps({
                "modalities": [{"name": "only", "path": "m.csv"}],
                "labels_path": "y.csv",
                "id_column": "subject",
                "label_column": "outcome",
            })
        )
        ds = load_manifest(tmp_path / "manifest.json")
        assert ds.sample_ids == ["A", "B", "C", "D"]
        assert list(ds.labels) == [0, 1, 0, 1]

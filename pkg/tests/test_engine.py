import numpy as np
import pytest

from fusemble.data import ModalitySynthSpec, SyntheticSpec, generate_synthetic
from fusemble.engine import CvConfig, EnsemblePipeline
from fusemble.ensembles import EnsembleSpec, default_ensembles
from fusemble.learners import FittedBaseModel, LearnerSpec
from fusemble.metrics import roc_auc


def two_modality_dataset(n=40, seed=3, complementarity=1.0):
    return generate_synthetic(
        SyntheticSpec(
            n,
            (ModalitySynthSpec(3, 1, 0.5), ModalitySynthSpec(3, 1, 0.5)),
            complementarity,
            seed,
        )
    )


class TestShapes:
    def test_single_modality_matrix_shapes(self):
        ds = generate_synthetic(SyntheticSpec(8, (ModalitySynthSpec(2, 1, 0.5),), 0.0, 1))
        pipe = EnsemblePipeline(CvConfig(k_outer=2, k_inner=2, seed=0, mode="both"))
        pipe.fit_base(ds, {"m0": [LearnerSpec("gnb")]})
        folds = pipe.outer_fold_data()
        assert len(folds) == 2
        for fd in folds:
            assert fd.train_matrix.shape == (4, 1)
            assert fd.test_matrix.shape == (4, 1)
        final_T, keys = pipe.final_training_data()
        assert final_T.shape == (8, 1)
        assert keys == [("m0", "gnb")]

    def test_column_key_order_follows_dataset_modalities(self):
        ds = two_modality_dataset()
        pipe = EnsemblePipeline(CvConfig(k_outer=2, k_inner=2, seed=0, mode="evaluate"))
        # assign in reverse order; keys still follow dataset order
        pipe.fit_base(ds, {"m1": [LearnerSpec("gnb")]})
        pipe.fit_base(ds, {"m0": [LearnerSpec("logistic"), LearnerSpec("knn")]})
        assert pipe.column_keys() == [
            ("m0", "logistic"), ("m0", "knn"), ("m1", "gnb")
        ]


class TestNoLeakage:
    def test_probe_entries_all_zero(self):
        ds = two_modality_dataset(n=40)
        pipe = EnsemblePipeline(CvConfig(k_outer=3, k_inner=3, seed=7, mode="both"))
        pipe.fit_base(ds, [LearnerSpec("leak_probe")])
        for fd in pipe.outer_fold_data():
            assert np.all(fd.train_matrix == 0.0)
            assert np.all(fd.test_matrix == 0.0)
        final_T, _ = pipe.final_training_data()
        assert np.all(final_T == 0.0)


class TestIterativeFitBase:
    def test_per_modality_calls_match_single_call(self):
        ds = two_modality_dataset(n=32, seed=9)
        specs = [LearnerSpec("logistic"), LearnerSpec("forest"), LearnerSpec("knn")]
        cv = CvConfig(k_outer=3, k_inner=2, seed=11, mode="both")

        single = EnsemblePipeline(cv).fit_base(ds, {"m0": specs, "m1": specs})
        split = EnsemblePipeline(cv)
        split.fit_base(ds, {"m0": specs})
        split.fit_base(ds, {"m1": specs})

        for a, b in zip(single.outer_fold_data(), split.outer_fold_data()):
            assert np.array_equal(a.train_matrix, b.train_matrix)
            assert np.array_equal(a.test_matrix, b.test_matrix)
        fa, _ = single.final_training_data()
        fb, _ = split.final_training_data()
        assert np.array_equal(fa, fb)

    def test_refitting_same_modality_rejected(self):
        ds = two_modality_dataset()
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        pipe.fit_base(ds, {"m0": [LearnerSpec("gnb")]})
        with pytest.raises(ValueError, match="already fitted"):
            pipe.fit_base(ds, {"m0": [LearnerSpec("knn")]})

    def test_different_dataset_rejected(self):
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        pipe.fit_base(two_modality_dataset(seed=1), {"m0": [LearnerSpec("gnb")]})
        with pytest.raises(ValueError, match="different dataset"):
            pipe.fit_base(two_modality_dataset(seed=2), {"m1": [LearnerSpec("gnb")]})

    def test_fit_ensemble_requires_full_coverage(self):
        ds = two_modality_dataset()
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        pipe.fit_base(ds, {"m0": [LearnerSpec("gnb")]})
        with pytest.raises(ValueError, match="not covered"):
            pipe.fit_ensemble(default_ensembles())


class TestEnsembleStage:
    def test_identical_columns_mean_equals_base(self):
        # two logistic learners produce identical columns (no RNG in training)
        ds = generate_synthetic(SyntheticSpec(24, (ModalitySynthSpec(3, 1, 0.5),), 0.0, 5))
        pipe = EnsemblePipeline(CvConfig(2, 2, 3, "evaluate"))
        pipe.fit_base(
            ds, {"m0": [LearnerSpec("logistic", name="lr_a"),
                        LearnerSpec("logistic", name="lr_b")]}
        )
        pipe.fit_ensemble([EnsembleSpec("mean", id="mean")])
        base = pipe.base_summary
        ens = pipe.ensemble_summary
        assert base.iloc[0]["auc"] == base.iloc[1]["auc"]
        assert list(base["name"]) == ["m0.lr_a", "m0.lr_b"]  # name tie-break
        assert ens.iloc[0]["auc"] == base.iloc[0]["auc"]
        assert ens.iloc[0]["fmax"] == base.iloc[0]["fmax"]

    def test_base_summary_auc_equals_pooled_metric(self):
        ds = generate_synthetic(SyntheticSpec(24, (ModalitySynthSpec(3, 1, 0.5),), 0.0, 6))
        pipe = EnsemblePipeline(CvConfig(2, 2, 2, "evaluate"))
        pipe.fit_base(ds, {"m0": [LearnerSpec("gnb")]})
        summary = pipe.base_summary
        assert len(summary) == 1
        pooled = pipe.pooled_base_scores()["m0.gnb"]
        assert summary.iloc[0]["auc"] == roc_auc(pooled, pipe._pooled_labels())

    def test_perfect_base_predictor_scores_one(self):
        # the single feature IS the label: 1-NN outer-test scores equal labels
        labels = np.tile([0, 1], 8)
        from fusemble.data import ModalityMatrix, MultiModalDataset

        ds = MultiModalDataset(
            [ModalityMatrix("m0", labels.astype(float).reshape(-1, 1), ["x"])],
            labels,
            [f"s{i}" for i in range(16)],
        )
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        pipe.fit_base(ds, {"m0": [LearnerSpec("knn", params={"k": 1})]})
        row = pipe.base_summary.iloc[0]
        assert row["auc"] == 1.0
        assert row["fmax"] == 1.0

    def test_one_row_per_ensemble(self):
        ds = two_modality_dataset(n=24, seed=2)
        pipe = EnsemblePipeline(CvConfig(2, 2, 1, "evaluate"))
        pipe.fit_base(ds, [LearnerSpec("gnb")])
        pipe.fit_ensemble(
            [
                EnsembleSpec("mean", id="mean"),
                EnsembleSpec("median", id="median"),
                EnsembleSpec("stacker", id="stack", meta=LearnerSpec("logistic")),
            ]
        )
        assert len(pipe.ensemble_summary) == 3
        assert set(pipe.ensemble_summary["name"]) == {"mean", "median", "stack"}

    def test_duplicate_ids_rejected(self):
        ds = two_modality_dataset(n=24)
        pipe = EnsemblePipeline(CvConfig(2, 2, 1, "evaluate"))
        pipe.fit_base(ds, [LearnerSpec("gnb")])
        with pytest.raises(ValueError, match="unique"):
            pipe.fit_ensemble([EnsembleSpec("mean", id="x"), EnsembleSpec("median", id="x")])

    def test_ensemble_beats_best_base_on_complementary_data(self):
        ds = generate_synthetic(
            SyntheticSpec(
                200,
                (ModalitySynthSpec(5, 2, 0.5), ModalitySynthSpec(5, 2, 0.5)),
                complementarity=1.0,
                seed=13,
            )
        )
        pipe = EnsemblePipeline(CvConfig(3, 3, 0, "evaluate"))
        pipe.fit_base(ds, [LearnerSpec("logistic"), LearnerSpec("gnb")])
        pipe.fit_ensemble(default_ensembles())
        best_base = pipe.base_summary.iloc[0]["auc"]
        best_ensemble = pipe.ensemble_summary.iloc[0]["auc"]
        assert best_ensemble > best_base

    def test_label_shuffle_gives_null_aucs(self):
        rng = np.random.default_rng(0)
        ds = generate_synthetic(
            SyntheticSpec(
                200,
                (ModalitySynthSpec(4, 2, 0.5), ModalitySynthSpec(4, 2, 0.5)),
                0.5,
                seed=3,
            )
        )
        ds.labels = rng.permutation(ds.labels)
        pipe = EnsemblePipeline(CvConfig(3, 3, 1, "evaluate"))
        pipe.fit_base(ds, [LearnerSpec("logistic"), LearnerSpec("gnb")])
        pipe.fit_ensemble(default_ensembles())
        for auc in list(pipe.base_summary["auc"]) + list(pipe.ensemble_summary["auc"]):
            assert 0.3 < auc < 0.7


class TestPredict:
    def hand_built_pipeline(self):
        ds = two_modality_dataset(n=24, seed=4)
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "build_final"))
        pipe.fit_base(ds, [LearnerSpec("gnb")])
        pipe.fit_ensemble([EnsembleSpec("mean", id="mean")])
        return ds, pipe

    def test_constant_half_models_predict_half(self):
        ds, pipe = self.hand_built_pipeline()
        # swap in zero-weight logistic models: every base score is 0.5
        for mod in ds.modality_names:
            width = ds.modality(mod).features.shape[1]
            pipe._blocks[mod]["final_models"] = [
                FittedBaseModel(
                    spec=LearnerSpec("logistic"),
                    feature_count=width,
                    parameters={
                        "weights": np.zeros(width),
                        "bias": 0.0,
                        "mean": np.zeros(width),
                        "std": np.ones(width),
                    },
                )
            ]
        samples = {m: ds.modality(m).features for m in ds.modality_names}
        assert np.all(pipe.predict(samples, "mean") == 0.5)

    def test_mean_prediction_is_row_mean_of_base_scores(self):
        from fusemble.learners import predict_proba

        ds, pipe = self.hand_built_pipeline()
        samples = {m: ds.modality(m).features for m in ds.modality_names}
        expected = np.column_stack(
            [
                predict_proba(pipe._blocks[m]["final_models"][0], samples[m])
                for m in ds.modality_names
            ]
        ).mean(axis=1)
        assert np.array_equal(pipe.predict(samples, "mean"), expected)

    def test_holdout_auc_on_complementary_signal(self):
        train = generate_synthetic(
            SyntheticSpec(
                200,
                (ModalitySynthSpec(5, 2, 0.5), ModalitySynthSpec(5, 2, 0.5)),
                1.0,
                seed=21,
            )
        )
        holdout = generate_synthetic(
            SyntheticSpec(
                200,
                (ModalitySynthSpec(5, 2, 0.5), ModalitySynthSpec(5, 2, 0.5)),
                1.0,
                seed=22,
            )
        )
        pipe = EnsemblePipeline(CvConfig(3, 3, 2, "both"))
        pipe.fit_base(train, [LearnerSpec("logistic"), LearnerSpec("gnb")])
        pipe.fit_ensemble(default_ensembles())
        best = pipe.ensemble_summary.iloc[0]["name"]
        samples = {m: holdout.modality(m).features for m in holdout.modality_names}
        auc = roc_auc(pipe.predict(samples, best), holdout.labels)
        assert auc > 0.7

    def test_errors(self):
        ds, pipe = self.hand_built_pipeline()
        samples = {m: ds.modality(m).features for m in ds.modality_names}
        with pytest.raises(ValueError, match="unknown ensemble_id"):
            pipe.predict(samples, "nope")
        with pytest.raises(ValueError, match="missing modality"):
            pipe.predict({"m0": samples["m0"]}, "mean")
        with pytest.raises(ValueError, match="width mismatch"):
            pipe.predict({"m0": samples["m0"], "m1": samples["m1"][:, :2]}, "mean")

    def test_predict_requires_final_mode(self):
        ds = two_modality_dataset(n=24)
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        pipe.fit_base(ds, [LearnerSpec("gnb")])
        pipe.fit_ensemble([EnsembleSpec("mean", id="mean")])
        with pytest.raises(RuntimeError, match="build_final"):
            pipe.predict({m: ds.modality(m).features for m in ds.modality_names}, "mean")


class TestDeterminism:
    def test_worker_count_does_not_change_results(self):
        ds = two_modality_dataset(n=36, seed=8)
        specs = [LearnerSpec("logistic"), LearnerSpec("forest"), LearnerSpec("gnb")]

        def run(workers):
            pipe = EnsemblePipeline(CvConfig(2, 2, 5, "both"), workers=workers)
            pipe.fit_base(ds, specs)
            pipe.fit_ensemble(default_ensembles())
            return pipe

        a = run(1)
        b = run(2)
        for fa, fb in zip(a.outer_fold_data(), b.outer_fold_data()):
            assert np.array_equal(fa.train_matrix, fb.train_matrix)
            assert np.array_equal(fa.test_matrix, fb.test_matrix)
        ta, _ = a.final_training_data()
        tb, _ = b.final_training_data()
        assert np.array_equal(ta, tb)
        assert a.ensemble_summary.equals(b.ensemble_summary)
        samples = {m: ds.modality(m).features for m in ds.modality_names}
        assert np.array_equal(samples and a.predict(samples, "mean"),
                              b.predict(samples, "mean"))

    def test_repeat_runs_identical(self):
        ds = two_modality_dataset(n=30, seed=6)
        def run():
            pipe = EnsemblePipeline(CvConfig(2, 2, 9, "evaluate"))
            pipe.fit_base(ds, [LearnerSpec("forest"), LearnerSpec("knn")])
            pipe.fit_ensemble(default_ensembles())
            return pipe.ensemble_summary
        assert run().equals(run())


class TestGuards:
    def test_summaries_before_fit_raise(self):
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        with pytest.raises(RuntimeError):
            pipe.base_summary
        with pytest.raises(RuntimeError):
            pipe.ensemble_summary

    def test_fold_infeasibility_reported(self):
        ds = generate_synthetic(SyntheticSpec(8, (ModalitySynthSpec(2, 1, 0.5),), 0.0, 1))
        with pytest.raises(ValueError, match="fold infeasibility"):
            EnsemblePipeline(CvConfig(5, 2, 0, "evaluate")).fit_base(
                ds, [LearnerSpec("gnb")]
            )

    def test_training_failure_carries_context(self):
        from fusemble.learners import TrainingError

        ds = two_modality_dataset(n=24)
        bad = LearnerSpec("logistic", params={"lr": 1e200, "l2": 1.0}, name="diverges")
        pipe = EnsemblePipeline(CvConfig(2, 2, 0, "evaluate"))
        with pytest.raises(TrainingError, match="m0.*diverges"):
            pipe.fit_base(ds, {"m0": [bad], "m1": [LearnerSpec("gnb")]})

"""ROC construction, two AUC routes, and grid selection by cross validation."""

import numpy as np
import pytest

from conftest import pairs_auc
from seqsvm import data, evaluate, trainer
from seqsvm.errors import DataError, DegenerateLabelsError, InsufficientDataError


class TestRocCurve:
    def test_perfect_separation(self):
        curve = evaluate.roc_curve([0.9, 0.4, 0.8, 0.1], [1, -1, 1, -1])
        assert curve.points[0].tolist() == [0.0, 0.0]
        assert curve.points[-1].tolist() == [1.0, 1.0]
        np.testing.assert_allclose(evaluate.auc(curve), 1.0)

    def test_one_swap_gives_three_quarters(self):
        curve = evaluate.roc_curve([0.9, 0.8, 0.4, 0.1], [1, -1, 1, -1])
        np.testing.assert_allclose(evaluate.auc(curve), 0.75)

    def test_threshold_starts_at_infinity(self):
        curve = evaluate.roc_curve([0.5, 0.2], [1, -1])
        assert curve.thresholds[0] == np.inf

    def test_tied_scores_grouped(self):
        # tie block advances fpr and tpr in one threshold step; the tied
        # positive-negative pair earns half credit, the clear pair full
        curve = evaluate.roc_curve([0.5, 0.5, 0.1], [1, -1, -1])
        assert curve.points.shape[0] == 3  # origin, tie group, final
        np.testing.assert_allclose(evaluate.auc(curve), 0.75)

    def test_monotone_axes(self):
        rng = np.random.default_rng(21)
        scores = rng.normal(size=40)
        labels = np.where(rng.uniform(size=40) < 0.5, 1, -1)
        if not (np.any(labels == 1) and np.any(labels == -1)):
            labels[0], labels[1] = 1, -1
        curve = evaluate.roc_curve(scores, labels)
        assert np.all(np.diff(curve.fpr) >= 0.0)
        assert np.all(np.diff(curve.tpr) >= 0.0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            evaluate.roc_curve([0.5], [1, -1])
        with pytest.raises(DataError):
            evaluate.roc_curve([0.5, 0.2], [1, 2])
        with pytest.raises(DegenerateLabelsError):
            evaluate.roc_curve([0.5, 0.2], [1, 1])


class TestAucRoutes:
    def test_trapezoid_equals_rank_statistic(self):
        rng = np.random.default_rng(22)
        for _ in range(25):
            n = int(rng.integers(4, 40))
            scores = np.round(rng.normal(size=n), 1)  # force some ties
            labels = np.where(rng.uniform(size=n) < 0.6, 1, -1)
            if not (np.any(labels == 1) and np.any(labels == -1)):
                labels[0], labels[1] = 1, -1
            a = evaluate.auc(evaluate.roc_curve(scores, labels))
            b = evaluate.rank_auc(scores, labels)
            assert abs(a - b) <= 1e-12
            assert abs(a - pairs_auc(scores, labels)) <= 1e-12

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(23)
        scores = rng.normal(size=30)
        labels = np.r_[np.ones(15), -np.ones(15)].astype(int)
        a = evaluate.rank_auc(scores, labels)
        b = evaluate.rank_auc(np.exp(scores * 2.0), labels)
        assert abs(a - b) <= 1e-12

    def test_flip_symmetry(self):
        rng = np.random.default_rng(24)
        scores = rng.normal(size=20)
        labels = np.r_[np.ones(8), -np.ones(12)].astype(int)
        a = evaluate.rank_auc(scores, labels)
        b = evaluate.rank_auc(-scores, labels)
        np.testing.assert_allclose(a + b, 1.0, atol=1e-12)


class TestCsvAndSummary:
    def test_csv_header_and_rows(self):
        curve = evaluate.roc_curve([0.9, 0.1], [1, -1])
        text = evaluate.roc_to_csv(curve)
        lines = text.strip().split("\n")
        assert lines[0] == "threshold,fpr,tpr"
        assert lines[1].startswith("inf,0.0,0.0")
        # rows parse back to floats
        for line in lines[1:]:
            thr, fpr, tpr = line.split(",")
            float(thr), float(fpr), float(tpr)

    def test_auc_summary_fields(self):
        doc = evaluate.auc_summary([0.9, 0.8, 0.4, 0.1], [1, -1, 1, -1])
        assert doc == {"auc": 0.75, "n_pos": 2, "n_neg": 2}


def _labeled_batch(n_normal, n_anomalous, seed=0):
    prof = data.SynthProfile(p=1, d_min=4, d_max=8)
    return data.synth_generate(prof, n_normal, n_anomalous, seed)


class TestCrossval:
    def test_two_folds_partition_and_stratify(self):
        batch = _labeled_batch(10, 4)
        a, b = evaluate._two_folds(batch, seed=3)
        assert a.n + b.n == batch.n
        ids = sorted([it.id for it in a.items] + [it.id for it in b.items])
        assert ids == sorted(it.id for it in batch.items)
        for fold in (a, b):
            labels = fold.labels()
            assert 1 in labels and -1 in labels

    def test_insufficient_class_members(self):
        batch = _labeled_batch(6, 1)
        with pytest.raises(InsufficientDataError):
            evaluate._two_folds(batch, seed=1)

    def test_selects_best_and_breaks_ties_earliest(self):
        batch = _labeled_batch(12, 6, seed=5)
        base = trainer.TrainConfig(m=2, max_outer_iters=3, mu=0.01, seed=7)
        # identical configs tie on AUC; earliest index must win
        grid = [base, base]
        chosen = evaluate.crossval_select(batch, grid)
        assert chosen is grid[0]

    def test_divergent_config_scores_zero(self):
        batch = _labeled_batch(12, 6, seed=6)
        sane = trainer.TrainConfig(m=2, max_outer_iters=3, mu=0.01, seed=7)
        wild = trainer.TrainConfig(m=2, max_outer_iters=40, mu=1e6, seed=7)
        auc_wild = evaluate._fold_auc(*evaluate._two_folds(batch, 11), wild)
        auc_sane = evaluate._fold_auc(*evaluate._two_folds(batch, 11), sane)
        assert auc_wild == 0.0 or auc_wild <= 0.5
        assert 0.0 <= auc_sane <= 1.0
        chosen = evaluate.crossval_select(batch, [wild, sane])
        assert chosen in (wild, sane)

    def test_rejects_empty_grid_and_unlabeled_batch(self):
        batch = _labeled_batch(8, 4)
        with pytest.raises(ValueError):
            evaluate.crossval_select(batch, [])
        unlabeled = data.SequenceBatch.from_items(
            [data.SequenceItem("u", np.zeros((1, 3)), None)])
        with pytest.raises(DataError):
            evaluate.crossval_select(unlabeled,
                                     [trainer.TrainConfig(m=2, seed=0)])

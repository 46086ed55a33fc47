"""Sequence I/O, normalization, splitting, injection, and synthesis."""

import json

import numpy as np
import pytest

from seqsvm import data
from seqsvm.errors import ConfigError, DataError, InsufficientDataError


def _make_batch(n_normal, n_anomalous, p=2, d=4, seed=0):
    rng = np.random.default_rng(seed)
    items = []
    for k in range(n_normal):
        items.append(data.SequenceItem(f"n{k}", rng.normal(size=(p, d)), 1))
    for k in range(n_anomalous):
        items.append(data.SequenceItem(f"a{k}", rng.normal(size=(p, d)), -1))
    return data.SequenceBatch.from_items(items)


class TestBatchValidation:
    def test_mixed_dimensions_rejected(self):
        items = [data.SequenceItem("a", np.zeros((2, 3)), None),
                 data.SequenceItem("b", np.zeros((3, 3)), None)]
        with pytest.raises(DataError):
            data.SequenceBatch.from_items(items)

    def test_bad_label_rejected(self):
        with pytest.raises(DataError):
            data.SequenceBatch.from_items(
                [data.SequenceItem("a", np.zeros((2, 3)), 2)])

    def test_labels_and_counts(self):
        batch = _make_batch(3, 2)
        assert batch.n == len(batch) == 5
        assert batch.p == 2
        assert batch.is_fully_labeled()
        assert batch.labels() == [1, 1, 1, -1, -1]


class TestJsonl:
    def test_round_trip(self, tmp_path):
        batch = _make_batch(3, 1, d=5)
        path = tmp_path / "seqs.jsonl"
        data.save_jsonl(path, batch)
        back = data.load_jsonl(path)
        assert back.n == batch.n
        for a, b in zip(batch.items, back.items):
            assert a.id == b.id and a.label == b.label
            np.testing.assert_allclose(b.values, a.values, rtol=1e-15)

    def test_label_omitted_when_missing(self, tmp_path):
        item = data.SequenceItem("x", np.ones((1, 2)), None)
        path = tmp_path / "one.jsonl"
        data.save_jsonl(path, data.SequenceBatch.from_items([item]))
        doc = json.loads(path.read_text().strip())
        assert "label" not in doc

    def test_values_stored_time_major(self, tmp_path):
        # two dims, three steps: the file holds d rows of p numbers
        values = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        path = tmp_path / "tm.jsonl"
        data.save_jsonl(path, data.SequenceBatch.from_items(
            [data.SequenceItem("x", values, None)]))
        doc = json.loads(path.read_text().strip())
        assert doc["values"] == [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "values": [[0.0]]}\nnot json\n')
        with pytest.raises(DataError, match="line 2"):
            data.load_jsonl(path)

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "ragged.jsonl"
        path.write_text('{"values": [[0.0, 1.0], [2.0]]}\n')
        with pytest.raises(DataError, match="line 1"):
            data.load_jsonl(path)

    def test_missing_file(self):
        with pytest.raises(DataError, match="not found"):
            data.load_jsonl("/nonexistent/file.jsonl")


class TestCsv:
    def test_groups_sorted_by_time(self, tmp_path):
        path = tmp_path / "seqs.csv"
        path.write_text(
            "id,time,f0,f1,label\n"
            "b,1,0.5,0.6,-1\n"
            "a,2,3.0,4.0,1\n"
            "b,0,0.1,0.2,-1\n"
            "a,1,1.0,2.0,1\n")
        batch = data.load_csv(path)
        # first-appearance order of ids
        assert [it.id for it in batch.items] == ["b", "a"]
        np.testing.assert_allclose(batch.items[0].values,
                                   [[0.1, 0.5], [0.2, 0.6]])
        np.testing.assert_allclose(batch.items[1].values,
                                   [[1.0, 3.0], [2.0, 4.0]])
        assert batch.labels() == [-1, 1]

    def test_inconsistent_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,time,f0,label\na,0,0.1,1\na,1,0.2,-1\n")
        with pytest.raises(DataError):
            data.load_csv(path)


class TestNormalization:
    def test_range_and_constant_dims(self):
        items = [data.SequenceItem("a", np.array([[0.0, 10.0], [7.0, 7.0]]), None),
                 data.SequenceItem("b", np.array([[5.0, 2.0], [7.0, 7.0]]), None)]
        batch, stats = data.fit_and_normalize(data.SequenceBatch.from_items(items))
        stacked = np.concatenate([it.values for it in batch.items], axis=1)
        assert stacked[0].min() == -1.0 and stacked[0].max() == 1.0
        np.testing.assert_array_equal(stacked[1], 0.0)  # constant dim maps to 0

    def test_round_trip_within_tolerance(self):
        rng = np.random.default_rng(30)
        items = [data.SequenceItem(str(k), rng.normal(size=(3, 6)) * 10, None)
                 for k in range(4)]
        batch = data.SequenceBatch.from_items(items)
        normed, stats = data.fit_and_normalize(batch)
        back = data.denormalize(normed, stats)
        for orig, rec in zip(batch.items, back.items):
            np.testing.assert_allclose(rec.values, orig.values, atol=1e-12)

    def test_apply_clamps_out_of_range(self):
        train = data.SequenceBatch.from_items(
            [data.SequenceItem("a", np.array([[0.0, 1.0]]), None)])
        _, stats = data.fit_and_normalize(train)
        test = data.SequenceBatch.from_items(
            [data.SequenceItem("b", np.array([[-5.0, 9.0]]), None)])
        out = data.apply_normalization(test, stats)
        np.testing.assert_array_equal(out.items[0].values, [[-1.0, 1.0]])

    def test_dimension_mismatch_rejected(self):
        train = _make_batch(2, 0, p=2)
        _, stats = data.fit_and_normalize(train)
        test = _make_batch(1, 0, p=3)
        with pytest.raises(DataError):
            data.apply_normalization(test, stats)

    def test_empty_batch_rejected(self):
        with pytest.raises(DataError):
            data.fit_and_normalize(data.SequenceBatch.from_items([]))


class TestSplit:
    def test_counts_match_floor_rule(self):
        """90 normal + 10 anomalous, tf=0.6, af=0.1: 60 train (6 anomalous)."""
        batch = _make_batch(90, 10)
        train, test = data.split_train_test(batch, 0.6, 0.1, seed=4)
        assert train.n == 60 and test.n == 40
        assert sum(1 for it in train.items if it.label == -1) == 6
        assert sum(1 for it in test.items if it.label == -1) == 4

    def test_partition_of_input(self):
        batch = _make_batch(20, 5)
        train, test = data.split_train_test(batch, 0.7, 0.2, seed=9)
        ids = sorted(it.id for it in train.items) + sorted(it.id for it in test.items)
        assert sorted(ids) == sorted(it.id for it in batch.items)
        assert train.n + test.n == batch.n

    def test_zero_anomaly_fraction_trains_clean(self):
        batch = _make_batch(30, 0)
        train, test = data.split_train_test(batch, 0.5, 0.0, seed=1)
        assert all(it.label == 1 for it in train.items)
        assert all(it.label == 1 for it in test.items)
        assert train.n + test.n == 30

    def test_anomalies_all_land_in_test_when_af_zero(self):
        batch = _make_batch(20, 4)
        train, test = data.split_train_test(batch, 0.5, 0.0, seed=2)
        assert all(it.label == 1 for it in train.items)
        assert sum(1 for it in test.items if it.label == -1) == 4

    def test_deterministic_in_seed(self):
        batch = _make_batch(20, 5)
        a1, b1 = data.split_train_test(batch, 0.6, 0.2, seed=8)
        a2, b2 = data.split_train_test(batch, 0.6, 0.2, seed=8)
        a3, _ = data.split_train_test(batch, 0.6, 0.2, seed=9)
        assert [i.id for i in a1.items] == [i.id for i in a2.items]
        assert [i.id for i in b1.items] == [i.id for i in b2.items]
        assert [i.id for i in a1.items] != [i.id for i in a3.items]

    def test_exhausted_class_rejected(self):
        batch = _make_batch(4, 1)
        with pytest.raises(InsufficientDataError):
            data.split_train_test(batch, 0.8, 0.9, seed=0)

    def test_fraction_ranges_enforced(self):
        batch = _make_batch(5, 1)
        with pytest.raises(ValueError):
            data.split_train_test(batch, 1.5, 0.1, seed=0)
        with pytest.raises(ValueError):
            data.split_train_test(batch, 0.5, -0.1, seed=0)

    def test_unlabeled_input_rejected(self):
        items = [data.SequenceItem("u", np.zeros((1, 2)), None)]
        with pytest.raises(DataError):
            data.split_train_test(data.SequenceBatch.from_items(items), 0.5, 0.0, 0)


class TestInjection:
    def test_count_ids_and_labels(self):
        batch = _make_batch(10, 0, d=6)
        out = data.inject_gaussian_anomalies(batch, 3, seed=5)
        assert out.n == 13
        injected = out.items[10:]
        assert [it.id for it in injected] == ["injected-0", "injected-1", "injected-2"]
        assert all(it.label == -1 for it in injected)

    def test_zero_count_is_identity(self):
        batch = _make_batch(4, 0)
        assert data.inject_gaussian_anomalies(batch, 0, seed=1) is batch

    def test_moments_scale_by_ten(self):
        rng = np.random.default_rng(44)
        items = [data.SequenceItem(str(k), rng.normal(size=(1, 20)), 1)
                 for k in range(50)]
        batch = data.SequenceBatch.from_items(items)
        out = data.inject_gaussian_anomalies(batch, 200, seed=6)
        base = np.concatenate([it.values for it in batch.items], axis=1)
        injected = np.concatenate([it.values for it in out.items[50:]], axis=1)
        ratio = np.var(injected) / np.var(base)
        assert 8.0 < ratio < 12.0

    def test_lengths_within_observed_range(self):
        rng = np.random.default_rng(45)
        items = [data.SequenceItem(str(k), rng.normal(size=(1, d)), 1)
                 for k, d in enumerate([5, 9, 15])]
        out = data.inject_gaussian_anomalies(
            data.SequenceBatch.from_items(items), 50, seed=7)
        lengths = {it.values.shape[1] for it in out.items[3:]}
        assert min(lengths) >= 5 and max(lengths) <= 15

    def test_deterministic(self):
        batch = _make_batch(5, 0)
        a = data.inject_gaussian_anomalies(batch, 4, seed=3)
        b = data.inject_gaussian_anomalies(batch, 4, seed=3)
        for x, y in zip(a.items[5:], b.items[5:]):
            np.testing.assert_array_equal(x.values, y.values)


class TestSynth:
    def test_counts_ids_labels_shapes(self):
        prof = data.SynthProfile(p=2, d_min=4, d_max=9)
        batch = data.synth_generate(prof, 7, 3, seed=11)
        assert batch.n == 10
        assert batch.items[0].id == "normal-0"
        assert batch.items[7].id == "anomalous-0"
        assert batch.labels() == [1] * 7 + [-1] * 3
        for it in batch.items:
            assert it.values.shape[0] == 2
            assert 4 <= it.values.shape[1] <= 9

    def test_variance_ratio_near_ten(self):
        prof = data.SynthProfile(p=1, d_min=20, d_max=20)
        batch = data.synth_generate(prof, 300, 300, seed=12)
        normal = np.concatenate([it.values for it in batch.items[:300]], axis=1)
        anom = np.concatenate([it.values for it in batch.items[300:]], axis=1)
        ratio = np.var(anom) / np.var(normal)
        assert 8.0 < ratio < 12.0

    def test_profile_validation(self):
        with pytest.raises(ConfigError):
            data.SynthProfile(p=0)
        with pytest.raises(ConfigError):
            data.SynthProfile(d_min=10, d_max=5)
        with pytest.raises(ConfigError):
            data.SynthProfile(ar_coeff=1.0)
        with pytest.raises(ConfigError):
            data.SynthProfile(normal_scale=0.0)

    def test_deterministic(self):
        prof = data.SynthProfile()
        a = data.synth_generate(prof, 5, 2, seed=13)
        b = data.synth_generate(prof, 5, 2, seed=13)
        for x, y in zip(a.items, b.items):
            np.testing.assert_array_equal(x.values, y.values)

    def test_stationary_start(self):
        """First-step variance matches the stationary AR(1) variance."""
        prof = data.SynthProfile(p=1, d_min=2, d_max=2, ar_coeff=0.8,
                                 normal_scale=0.1)
        batch = data.synth_generate(prof, 4000, 0, seed=14)
        first = np.array([it.values[0, 0] for it in batch.items])
        want = prof.normal_scale ** 2 / (1.0 - prof.ar_coeff ** 2)
        assert abs(np.var(first) / want - 1.0) < 0.15

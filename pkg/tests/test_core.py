import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualboost.core import (
    Codebook,
    Dataset,
    DimensionError,
    DomainError,
    EmptyInputError,
    NumericError,
    classify,
    classify_batch,
    confusion_and_metrics,
    relative_improvement,
    score,
)


class TestCodebook:
    def test_codewords_are_unit_vectors(self):
        cb = Codebook(4)
        assert np.array_equal(cb.codewords, np.eye(4))
        assert np.array_equal(cb.encode([2, 0]), np.eye(4)[[2, 0]])

    def test_needs_two_classes(self):
        with pytest.raises(DomainError):
            Codebook(1)


class TestClassify:
    def test_argmax(self):
        assert classify([0.1, 2.0, -1.0], Codebook(3)) == 1

    def test_ties_go_to_lowest_index(self):
        assert classify([1.0, 3.0, 3.0], Codebook(3)) == 1
        assert classify([0.0, 0.0], Codebook(2)) == 0
        assert list(classify_batch(np.array([[2.0, 2.0, 1.0], [0.0, 5.0, 5.0]]), 3)) == [0, 1]

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            classify([1.0, 2.0], Codebook(3))
        with pytest.raises(DimensionError):
            classify_batch(np.zeros((3, 2)), 3)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=6))
    def test_matches_codeword_inner_products(self, f):
        cb = Codebook(len(f))
        k = classify(f, cb)
        prods = [float(np.dot(cb.codeword(j), f)) for j in range(len(f))]
        assert prods[k] == max(prods)
        assert all(prods[j] < prods[k] for j in range(k))


class TestMetrics:
    def test_binary_hand_computed(self):
        # tp=2, fp=1, fn=1, tn=2
        m = confusion_and_metrics([1, 1, 1, 0, 0, 0], [1, 1, 0, 1, 0, 0], 2)
        assert m.confusion.tolist() == [[2, 1], [1, 2]]
        assert m.accuracy == 4 / 6
        assert m.f1 == 2 * 2 / (2 * 2 + 1 + 1)

    def test_binary_no_positives_anywhere(self):
        m = confusion_and_metrics([0, 0, 0], [0, 0, 0], 2)
        assert m.f1 == 1.0 and m.accuracy == 1.0

    def test_binary_positive_never_found(self):
        assert score([0, 0], [1, 0], 2, "f1") == 0.0

    def test_macro_skips_absent_class(self):
        # class 2 never appears in either list
        m = confusion_and_metrics([0, 1, 1, 0], [0, 1, 0, 0], 3)
        f1_0 = 2 * 2 / (2 * 2 + 0 + 1)
        f1_1 = 2 * 1 / (2 * 1 + 1 + 0)
        assert m.f1 == pytest.approx((f1_0 + f1_1) / 2, abs=0)

    def test_invalid_inputs(self):
        with pytest.raises(EmptyInputError):
            confusion_and_metrics([], [], 2)
        with pytest.raises(DimensionError):
            confusion_and_metrics([0, 1], [0], 2)
        with pytest.raises(DomainError):
            confusion_and_metrics([0, 3], [0, 1], 2)
        with pytest.raises(Exception):
            score([0], [0], 2, "auc")

    @settings(max_examples=50)
    @given(st.integers(2, 5).flatmap(
        lambda m: st.tuples(st.just(m), st.lists(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)),
                                                 min_size=1, max_size=40))))
    def test_confusion_properties(self, case):
        M, pairs = case
        preds, labels = zip(*pairs)
        m = confusion_and_metrics(preds, labels, M)
        assert m.confusion.sum() == len(pairs)
        assert list(m.confusion.sum(axis=1)) == [labels.count(k) for k in range(M)]
        assert 0.0 <= m.f1 <= 1.0
        assert m.accuracy == sum(p == t for p, t in pairs) / len(pairs)


class TestRelativeImprovement:
    def test_value(self):
        assert relative_improvement(0.9, 0.8) == pytest.approx(12.5)

    def test_nonpositive_baseline(self):
        with pytest.raises(DomainError):
            relative_improvement(0.5, 0.0)


class TestDataset:
    def test_validation(self):
        with pytest.raises(DimensionError):
            Dataset(np.zeros((3, 2)), np.zeros((2, 2)), [0, 1, 0], 2)
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 1)), np.zeros((2, 1)), [0, 2], 2)
        with pytest.raises(NumericError):
            Dataset(np.full((1, 1), np.nan), np.zeros((1, 1)), [0], 2)

    def test_samples_and_subset(self):
        ds = Dataset(np.arange(6.0).reshape(3, 2), np.ones((3, 1)), [0, 1, 1], 2)
        samples = list(ds.samples)
        assert len(samples) == 3 and samples[2].label == 1
        assert np.array_equal(samples[1].x_u, [2.0, 3.0])
        sub = ds.subset([2, 0])
        assert sub.n == 2 and list(sub.y) == [1, 0]
        assert ds.equals(ds.subset(np.arange(3)))

"""Confusion matrix, metrics, rendering, and end-to-end evaluation."""

import numpy as np
import pytest

from birrnet.data import synth_generate
from birrnet.errors import ConfigError
from birrnet.evaluate import (ConfusionMatrix, confusion_from_predictions, evaluate,
                              metrics_from_matrix, render_confusion,
                              write_confusion_csv)
from birrnet.labels import DEFAULT_LABELS
from birrnet.model import build_model
from birrnet.rng import make_rng

from conftest import TINY_CONFIG


def constant_predictor(class_id: int):
    """Tiny model rigged to always predict one class."""
    model = build_model(TINY_CONFIG, make_rng(900))
    dense = model.layers[-1]
    dense.weight[...] = 0
    dense.bias[...] = 0
    dense.bias[class_id] = 10.0
    return model


class TestMatrixArithmetic:
    def test_identity_diagonal(self):
        matrix = confusion_from_predictions(range(6), range(6), 6)
        assert np.array_equal(matrix.counts, np.eye(6, dtype=np.int64))
        assert matrix.accuracy() == 1.0

    def test_hand_counted_accuracy(self):
        rng = make_rng(901)
        true = rng.integers(0, 6, size=50)
        pred = rng.integers(0, 6, size=50)
        matrix = confusion_from_predictions(true, pred, 6)
        hand_count = sum(1 for t, p in zip(true, pred) if t == p)
        assert matrix.accuracy() == hand_count / 50
        assert matrix.total == 50

    def test_trace_over_total_is_accuracy(self):
        rng = make_rng(902)
        counts = rng.integers(0, 30, size=(6, 6))
        matrix = ConfusionMatrix(counts.astype(np.int64))
        assert matrix.accuracy() == np.trace(counts) / counts.sum()

    def test_metrics_precision_recall(self):
        counts = np.zeros((6, 6), dtype=np.int64)
        counts[0, 0] = 8
        counts[0, 1] = 2   # class 0 leaks into 1
        counts[1, 1] = 10
        metrics = metrics_from_matrix(ConfusionMatrix(counts))
        assert metrics.recall[0] == pytest.approx(0.8)
        assert metrics.precision[1] == pytest.approx(10 / 12)
        assert metrics.precision[5] == 0.0  # empty class

    def test_order_independence(self):
        rng = make_rng(903)
        true = rng.integers(0, 6, size=40)
        pred = rng.integers(0, 6, size=40)
        a = confusion_from_predictions(true, pred, 6)
        perm = rng.permutation(40)
        b = confusion_from_predictions(true[perm], pred[perm], 6)
        assert np.array_equal(a.counts, b.counts)


class TestRender:
    def test_identity_matrix_off_diagonal_zeros(self):
        matrix = ConfusionMatrix(np.eye(6, dtype=np.int64) * 3)
        text = render_confusion(matrix, DEFAULT_LABELS)
        lines = text.splitlines()
        assert len(lines) == 8  # header + 6 classes + totals
        assert "ETB_5" in lines[0]
        body = [line.split() for line in lines[1:7]]
        for i, cells in enumerate(body):
            for j, value in enumerate(cells[1:7]):
                assert value == ("3" if i == j else "0")

    def test_marginals_match_for_random_matrix(self):
        rng = make_rng(904)
        counts = rng.integers(0, 9, size=(6, 6)).astype(np.int64)
        matrix = ConfusionMatrix(counts)
        lines = render_confusion(matrix, DEFAULT_LABELS).splitlines()
        for i in range(6):
            cells = lines[1 + i].split()
            assert int(cells[-1]) == counts[i].sum()
        totals = lines[-1].split()
        for j in range(6):
            assert int(totals[1 + j]) == counts[:, j].sum()
        assert int(totals[-1]) == counts.sum()

    def test_csv_layout(self, tmp_path):
        matrix = ConfusionMatrix(np.arange(36).reshape(6, 6).astype(np.int64))
        path = tmp_path / "confusion.csv"
        write_confusion_csv(matrix, DEFAULT_LABELS, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 7
        assert lines[1].startswith("ETB_5,0,1,2,3,4,5")


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval_corpus")
    return synth_generate(root, per_class=4, resolution=20, seed=905)


class TestEvaluate:
    def test_constant_predictor_on_its_class(self, corpus):
        model = constant_predictor(0)
        entries = [e for e in corpus.entries if e[1] == 0]
        metrics, matrix = evaluate(model, entries, corpus.root)
        assert metrics.accuracy == 1.0
        assert matrix.counts[0, 0] == len(entries)
        assert matrix.total == len(entries)

    def test_constant_predictor_concentrates_column(self, corpus):
        model = constant_predictor(3)
        metrics, matrix = evaluate(model, corpus.entries, corpus.root)
        assert matrix.col_totals()[3] == matrix.total
        assert metrics.accuracy == pytest.approx(4 / 24)

    def test_tie_break_lowest_class_id(self):
        model = constant_predictor(0)
        model.layers[-1].bias[...] = 0  # all logits exactly equal
        x = np.zeros((1, 32, 32, 3), dtype=np.float32)
        _, probs = model.forward(x)
        assert int(probs.reshape(-1).argmax()) == 0

    def test_order_independent_end_to_end(self, corpus):
        model = build_model(TINY_CONFIG, make_rng(906))
        entries = corpus.entries[:12]
        _, a = evaluate(model, entries, corpus.root)
        _, b = evaluate(model, list(reversed(entries)), corpus.root)
        assert np.array_equal(a.counts, b.counts)

    def test_failed_decode_reported_not_counted(self, corpus, tmp_path):
        model = constant_predictor(0)
        bad = corpus.root / "ETB_5" / "broken.png"
        bad.write_bytes(b"broken bytes")
        try:
            entries = [e for e in corpus.entries if e[1] == 0]
            entries.append(("ETB_5/broken.png", 0))
            metrics, matrix = evaluate(model, entries, corpus.root)
            assert matrix.total == len(entries) - 1
            assert len(metrics.failures) == 1
            assert "broken.png" in metrics.failures[0]
        finally:
            bad.unlink()

    def test_empty_entries_rejected(self, corpus):
        model = constant_predictor(0)
        with pytest.raises(ConfigError):
            evaluate(model, [], corpus.root)

import math
from fractions import Fraction

import numpy as np
import pytest

from hardc.errors import EmptyMatrix, IndexOutOfRange, LengthMismatch
from hardc.metrics import (
    ClassMetrics,
    confusion_csv,
    confusion_matrix,
    correlation_matrix,
    emit_report,
    evaluate,
    log_loss,
    macro_average,
    metrics_from_confusion,
    parse_report_csv,
    parse_report_json_lines,
)
from hardc.nn.layers import cross_entropy
from hardc.nn.tensor import Tensor

PROBS = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4], [0.6, 0.3, 0.1]])
LABELS = np.array([0, 1, 2, 1])

GOLDEN_TEXT = """\
class        accuracy    precision       recall  specificity           f1
A            0.750000     0.500000     1.000000     0.666667     0.666667
B            0.750000     1.000000     0.500000     1.000000     0.666667
C            1.000000     1.000000     1.000000     1.000000     1.000000
macro        0.833333     0.833333     0.833333     0.888889     0.777778

sample accuracy  0.750000
log loss         0.675021
seconds          0.500

confusion (rows true, columns predicted)
            A    B    C
A           1    0    0
B           1    1    0
C           0    0    1
"""


def test_count_oracle():
    m = ClassMetrics.from_counts(8, 2, 1, 9)
    exact = [Fraction(17, 20), Fraction(8, 10), Fraction(8, 9), Fraction(9, 11), Fraction(16, 19)]
    for got, want in zip(m.values(), exact):
        assert abs(got - float(want)) <= 1e-9
    assert [round(v, 6) for v in m.values()] == [0.85, 0.8, 0.888889, 0.818182, 0.842105]


def test_zero_denominators_are_zero():
    m = ClassMetrics.from_counts(0, 0, 0, 4)
    assert (m.precision, m.recall, m.f1, m.specificity) == (0.0, 0.0, 0.0, 1.0)
    with pytest.raises(EmptyMatrix):
        ClassMetrics.from_counts(0, 0, 0, 0)


def test_confusion_small_case():
    cm = confusion_matrix([0, 1, 1], [0, 1, 0], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 1]]  # rows true, columns predicted
    assert cm.total == 3
    assert cm.counts.sum(axis=1).tolist() == [2, 1]


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(IndexOutOfRange):
        confusion_matrix([0, 2], [0, 1], 2)
    with pytest.raises(IndexOutOfRange):
        confusion_matrix([0, 1], [-1, 1], 2)
    with pytest.raises(EmptyMatrix):
        metrics_from_confusion(confusion_matrix([], [], 3), 0)


def test_one_vs_rest_counts_partition_total(rng):
    preds, labels = rng.integers(0, 5, 200), rng.integers(0, 5, 200)
    cm = confusion_matrix(preds, labels, 5)
    for c in range(5):
        m = metrics_from_confusion(cm, c)
        assert m.tp + m.fp + m.fn + m.tn == 200
        assert m.tp == int(np.sum((preds == c) & (labels == c)))
        assert m.fp == int(np.sum((preds == c) & (labels != c)))


def test_macro_average():
    ms = [ClassMetrics.from_counts(1, 0, 0, 1), ClassMetrics.from_counts(0, 1, 1, 0)]
    assert macro_average(ms)["accuracy"] == 0.5


def test_log_loss_uniform_is_ln5():
    p = np.full((7, 5), 0.2)
    assert abs(log_loss(p, np.arange(7) % 5) - math.log(5)) <= 1e-12


def test_log_loss_matches_cross_entropy():
    assert log_loss(PROBS, LABELS) == pytest.approx(cross_entropy(Tensor(PROBS), LABELS).item(), abs=1e-15)
    with pytest.raises(LengthMismatch):
        log_loss(PROBS, [0, 1])


def test_correlation_matches_numpy(rng):
    x = rng.standard_normal((50, 4))
    x[:, 3] = 2 * x[:, 0] + 0.1 * x[:, 3]
    np.testing.assert_allclose(correlation_matrix(x), np.corrcoef(x, rowvar=False), atol=1e-12)


def test_correlation_constant_column(rng):
    x = rng.standard_normal((20, 3))
    x[:, 1] = 4.0
    c = correlation_matrix(x)
    assert c[1, 1] == 1.0
    assert c[1, 0] == c[0, 1] == c[1, 2] == 0.0
    np.testing.assert_array_equal(c, c.T)


def test_report_golden_text():
    r = evaluate(PROBS, LABELS, ["A", "B", "C"], seconds=0.5)
    assert emit_report(r, "text").decode() == GOLDEN_TEXT


def test_report_csv_round_trip():
    r = evaluate(PROBS, LABELS, ["A", "B", "C"])
    rows = parse_report_csv(emit_report(r, "csv"))
    assert list(rows) == ["A", "B", "C", "macro"]
    for m, name in zip(r.per_class, "ABC"):
        assert rows[name] == m.values()
    assert rows["macro"] == tuple(r.macro[f] for f in ("accuracy", "precision", "recall", "specificity", "f1"))


def test_report_json_lines_round_trip():
    r = evaluate(PROBS, LABELS, ["A", "B", "C"], seconds=1.25)
    back = parse_report_json_lines(emit_report(r, "json_lines"))
    assert back == r
    assert back.log_loss == r.log_loss


def test_report_unknown_format():
    with pytest.raises(ValueError):
        emit_report(evaluate(PROBS, LABELS, ["A", "B", "C"]), "xml")


def test_confusion_csv():
    assert confusion_csv(confusion_matrix([0, 1, 1], [0, 1, 0], 2)) == b"1,1\n0,1\n"


def test_report_without_timing():
    r = evaluate(PROBS, LABELS, ["A", "B", "C"], seconds=3.5)
    assert b"seconds" not in emit_report(r, "text", timing=False)
    assert b"seconds" not in emit_report(r, "json_lines", timing=False)
    back = parse_report_json_lines(emit_report(r, "json_lines", timing=False))
    assert back.seconds == 0.0 and back.per_class == r.per_class

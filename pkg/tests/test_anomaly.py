import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srnn.anomaly import (
    ABNORMAL,
    NORMAL,
    AnnotatedSeries,
    MissingClassError,
    annotate,
    detect,
    deviation,
    label_bins,
    margin,
)


def series(normal, abnormal):
    D = list(normal) + list(abnormal)
    labels = [NORMAL] * len(normal) + [ABNORMAL] * len(abnormal)
    return AnnotatedSeries(np.array(D, dtype=float), np.array(labels, dtype=object))


def test_deviation():
    assert deviation(20, 20) == 0
    assert deviation(20, 35) == 15 == deviation(35, 20)


def test_perfect_predictor_series_is_zero():
    f = np.linspace(0, 150, 20)
    assert all(deviation(a, b) == 0 for a, b in zip(f[1:], f[1:]))


def test_margin_positive():
    m = margin(series([1, 2, 3], [5, 7]))
    assert (m.D_no_max, m.D_ab_min, m.W_thr, m.F_thr) == (3, 5, 2, 4)


def test_margin_overlap():
    m = margin(series([1, 6], [5, 7]))
    assert m.W_thr == -1 and m.F_thr is None


def test_margin_zero():
    m = margin(series([1, 3], [3]))
    assert m.W_thr == 0 and m.F_thr is None


@pytest.mark.parametrize("normal,abnormal,missing", [([], [1.0], NORMAL), ([1.0], [], ABNORMAL)])
def test_missing_class_named(normal, abnormal, missing):
    with pytest.raises(MissingClassError, match=missing):
        margin(series(normal, abnormal))


def test_excluded_labels_ignored():
    s = AnnotatedSeries(np.array([1.0, 100.0, 5.0]), np.array([NORMAL, "", ABNORMAL], dtype=object))
    assert margin(s).W_thr == 4


def test_detect_strict():
    assert detect(5, 4)
    assert not detect(4, 4)
    assert detect(np.array([3.0, 4.0, 5.0]), 4).tolist() == [False, False, True]
    with pytest.raises(ValueError):
        detect(1.0, -1.0)


def test_positive_margin_detects_perfectly():
    rng = np.random.default_rng(0)
    s = series(rng.uniform(0, 10, 50), rng.uniform(12, 30, 10))
    m = margin(s)
    flags = detect(s.D, m.F_thr)
    assert np.array_equal(flags, s.labels == ABNORMAL)


finite = st.floats(0, 1e3, allow_nan=False)


@given(n=st.lists(finite, min_size=1, max_size=20), a=st.lists(finite, min_size=1, max_size=20),
       c=st.floats(-100, 100), s=st.floats(0.01, 100))
def test_shift_and_scale(n, a, c, s):
    w = margin(series(n, a)).W_thr
    assert margin(series(np.add(n, c), np.add(a, c))).W_thr == pytest.approx(w, abs=1e-9)
    assert margin(series(np.multiply(n, s), np.multiply(a, s))).W_thr == pytest.approx(
        s * w, rel=1e-9, abs=1e-9)


@given(n=st.lists(finite, min_size=1, max_size=20), a=st.lists(finite, min_size=1, max_size=20),
       seed=st.integers(0, 1000))
def test_permutation_invariant(n, a, seed):
    rng = np.random.default_rng(seed)
    assert margin(series(rng.permutation(n), rng.permutation(a))) == margin(series(n, a))


def test_label_bins_guard_band():
    ranges = [(0, 9, NORMAL), (10, 12, ABNORMAL), (13, 19, NORMAL)]
    labels = label_bins(20, ranges, guard=2)
    assert list(labels[8:15]) == ["", "", ABNORMAL, ABNORMAL, ABNORMAL, "", ""]
    assert labels[7] == NORMAL and labels[15] == NORMAL
    strict = label_bins(20, ranges, guard=0)
    assert strict[9] == NORMAL and strict[13] == NORMAL


def test_label_bins_uncovered_excluded():
    labels = label_bins(5, [(0, 1, NORMAL)])
    assert list(labels) == [NORMAL, NORMAL, "", "", ""]


def test_annotate_handles_missing_first_value():
    s = annotate([None, 1.0, 9.0], [(0, 1, NORMAL), (2, 2, ABNORMAL)])
    assert s.labels[0] == "" and np.isnan(s.D[0])
    assert margin(s).W_thr == 8.0


def test_series_length_mismatch():
    with pytest.raises(ValueError):
        AnnotatedSeries(np.zeros(3), np.array([NORMAL] * 2, dtype=object))

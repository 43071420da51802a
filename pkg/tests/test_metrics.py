import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docnn import metrics


def tally_oracle(t, p, c):
    """Direct-tally reference for OA and kappa, independent of the matrix path."""
    t, p = np.asarray(t), np.asarray(p)
    n = len(t)
    oa = int((t == p).sum()) / n
    pe = int((np.bincount(t, minlength=c) * np.bincount(p, minlength=c)).sum()) / (n * n)
    if pe == 1.0:
        return oa, 1.0 if oa == 1.0 else 0.0
    return oa, (oa - pe) / (1 - pe)


def test_confusion_perfect_is_diagonal():
    t = np.array([0, 1, 2, 1, 0])
    cm = metrics.confusion(t, t, 3)
    assert np.array_equal(cm, np.diag([2, 2, 1]))


def test_confusion_constant_prediction_single_column():
    cm = metrics.confusion([0, 1, 2, 2], [0, 0, 0, 0], 3)
    assert np.array_equal(cm[:, 0], [1, 1, 2]) and not cm[:, 1:].any()


def test_confusion_matches_counting_oracle():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 4, size=200)
    p = rng.integers(0, 4, size=200)
    cm = metrics.confusion(t, p, 4)
    for i in range(4):
        for j in range(4):
            assert cm[i, j] == int(((t == i) & (p == j)).sum())


def test_confusion_label_out_of_range():
    with pytest.raises(ValueError):
        metrics.confusion([0, 3], [0, 1], 3)


def test_oa_kappa_perfect():
    cm = np.diag([5, 7, 9])
    assert metrics.overall_accuracy(cm) == 1.0
    assert metrics.kappa(cm) == 1.0
    assert metrics.per_class_accuracy(cm) == [1.0, 1.0, 1.0]


def test_kappa_chance_agreement_is_zero():
    cm = np.array([[25, 25], [25, 25]])
    assert metrics.overall_accuracy(cm) == 0.5
    assert metrics.kappa(cm) == 0.0


def test_hand_case_40_10_5_45():
    cm = np.array([[40, 10], [5, 45]])
    assert metrics.overall_accuracy(cm) == 0.85
    assert metrics.kappa(cm) == pytest.approx(0.70, abs=1e-15)
    assert metrics.per_class_accuracy(cm) == [0.8, 0.9]


def test_kappa_degenerate_single_class():
    assert metrics.kappa(np.array([[12]])) == 1.0


def test_empty_matrix_rejected():
    with pytest.raises(ValueError):
        metrics.overall_accuracy(np.zeros((3, 3), dtype=int))
    with pytest.raises(ValueError):
        metrics.kappa(np.zeros((2, 2), dtype=int))


def test_per_class_requires_nonempty_rows():
    with pytest.raises(ValueError):
        metrics.per_class_accuracy(np.array([[3, 0], [0, 0]]))


def test_kappa_is_one_iff_diagonal():
    rng = np.random.default_rng(3)
    for _ in range(30):
        c = int(rng.integers(2, 5))
        cm = np.diag(rng.integers(1, 20, size=c))
        assert metrics.kappa(cm) == 1.0 and metrics.overall_accuracy(cm) == 1.0
        i, j = rng.choice(c, size=2, replace=False)
        cm[i, j] = int(rng.integers(1, 5))
        assert metrics.kappa(cm) < 1.0 and metrics.overall_accuracy(cm) < 1.0


def test_oa_kappa_equal_direct_tally():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = int(rng.integers(2, 6))
        n = int(rng.integers(1, 400))
        t = rng.integers(0, c, size=n)
        p = rng.integers(0, c, size=n)
        cm = metrics.confusion(t, p, c)
        oa, kap = tally_oracle(t, p, c)
        assert metrics.overall_accuracy(cm) == oa
        assert metrics.kappa(cm) == kap


@settings(max_examples=30)
@given(st.integers(2, 5), st.integers(0, 500), st.permutations(range(5)))
def test_oa_kappa_invariant_under_class_permutation(c, seed, perm):
    rng = np.random.default_rng(seed)
    t = rng.integers(0, c, size=60)
    p = rng.integers(0, c, size=60)
    # a consistent relabeling of both lists leaves agreement untouched
    perm = np.array([x for x in perm if x < c])
    cm1 = metrics.confusion(t, p, c)
    cm2 = metrics.confusion(perm[t], perm[p], c)
    assert metrics.overall_accuracy(cm1) == metrics.overall_accuracy(cm2)
    assert metrics.kappa(cm1) == pytest.approx(metrics.kappa(cm2), abs=1e-12)


def report(oa, kappa=0.5):
    return metrics.EvalReport(oa=oa, kappa=kappa, per_class=[oa],
                              confusion=np.array([[1]]))


def test_aggregate_single_report():
    summary = metrics.aggregate([report(0.9)])
    assert summary.oa_mean == 0.9 and summary.oa_std == 0.0 and summary.n_runs == 1


def test_aggregate_two_point_formula():
    summary = metrics.aggregate([report(0.9), report(1.0)])
    assert summary.oa_mean == pytest.approx(0.95)
    assert summary.oa_std == pytest.approx(np.sqrt(((0.9 - 0.95) ** 2 + (1.0 - 0.95) ** 2) / 1))
    assert summary.oa_std == pytest.approx(0.0707, abs=2e-4)


def test_aggregate_identical_reports():
    summary = metrics.aggregate([report(0.8)] * 4)
    assert summary.oa_std == 0.0


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        metrics.aggregate([])


def test_render_single_pixel_class_zero():
    ppm, legend = metrics.render_map(np.array([[0]]))
    assert ppm == b"P6\n1 1\n255\n" + bytes(metrics.DEFAULT_PALETTE[0])
    assert legend["class_0"] == list(metrics.DEFAULT_PALETTE[0])


def test_render_all_unlabeled_is_black():
    ppm, _ = metrics.render_map(np.full((3, 2), -1))
    assert ppm == b"P6\n2 3\n255\n" + b"\x00" * 18


def test_render_checkerboard_byte_exact():
    raster = np.array([[0, 1], [1, 0]])
    palette = [(255, 0, 0), (0, 0, 255)]
    ppm, legend = metrics.render_map(raster, palette=palette, class_names=["red", "blue"])
    expected = (b"P6\n2 2\n255\n"
                + bytes((255, 0, 0)) + bytes((0, 0, 255))
                + bytes((0, 0, 255)) + bytes((255, 0, 0)))
    assert ppm == expected
    assert legend == {"unlabeled": [0, 0, 0], "red": [255, 0, 0], "blue": [0, 0, 255]}


def test_render_palette_too_small():
    with pytest.raises(ValueError):
        metrics.render_map(np.array([[5]]), palette=[(1, 2, 3)])

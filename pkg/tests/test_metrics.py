import numpy as np
import pytest
from hypothesis import given, strategies as st

from exprensemble.core import ValidationError
from exprensemble.metrics import EvalReport, confusion, evaluate, f1_per_class, macro_f1

label_pairs = st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=200)


def test_confusion_tally():
    cm = confusion([0, 1, 0], [0, 1, 1])
    expected = np.zeros((8, 8), dtype=int)
    expected[0, 0] = expected[1, 1] = expected[1, 0] = 1
    np.testing.assert_array_equal(cm, expected)


def test_confusion_perfect_is_diagonal():
    labels = [0, 3, 3, 7, 7, 7]
    np.testing.assert_array_equal(confusion(labels, labels), np.diag([1, 0, 0, 2, 0, 0, 0, 3]))


def test_confusion_empty():
    np.testing.assert_array_equal(confusion([], []), np.zeros((8, 8)))


def test_confusion_length_mismatch():
    with pytest.raises(ValidationError, match="3 predictions vs 2 labels"):
        confusion([0, 1, 2], [0, 1])


def test_f1_hand_example():
    f1 = f1_per_class(confusion([0, 1, 0], [0, 1, 1]))
    np.testing.assert_allclose(f1[:2], [2 / 3, 2 / 3], atol=1e-12)
    assert np.all(f1[2:] == 0.0)


def test_f1_perfect():
    labels = [0, 2, 2, 5]
    f1 = f1_per_class(confusion(labels, labels))
    np.testing.assert_array_equal(f1, [1, 0, 1, 0, 0, 1, 0, 0])


def test_macro_f1_hand_example():
    assert macro_f1(confusion([0, 1, 0], [0, 1, 1])) == pytest.approx(1 / 6, abs=1e-12)


def test_macro_f1_perfect_and_all_wrong():
    labels = list(range(8)) * 3
    assert macro_f1(confusion(labels, labels)) == 1.0
    assert macro_f1(confusion([(y + 1) % 8 for y in labels], labels)) == 0.0


def test_report_fields():
    r = evaluate([0, 1, 0], [0, 1, 1])
    assert r.support == (1, 2, 0, 0, 0, 0, 0, 0)
    assert r.per_class_precision[0] == 0.5 and r.per_class_recall[1] == 0.5
    assert r.n_frames == 3
    assert [row["class"] for row in r.rows()][-1] == "other"


@given(label_pairs, st.randoms(use_true_random=False))
def test_permutation_invariance(pairs, random):
    shuffled = list(pairs)
    random.shuffle(shuffled)
    a = confusion(*zip(*pairs))
    b = confusion(*zip(*shuffled))
    np.testing.assert_array_equal(a, b)


@given(label_pairs)
def test_report_ranges_and_mean(pairs):
    r = evaluate(*zip(*pairs))
    values = r.per_class_f1 + r.per_class_precision + r.per_class_recall + (r.macro_f1,)
    assert all(0.0 <= v <= 1.0 for v in values)
    assert abs(r.macro_f1 - np.mean(r.per_class_f1)) <= 1e-12


@given(label_pairs, st.data())
def test_fixing_a_prediction_never_hurts_its_class(pairs, data):
    wrong = [i for i, (p, t) in enumerate(pairs) if p != t]
    if not wrong:
        return
    i = data.draw(st.sampled_from(wrong))
    pred, true = map(list, zip(*pairs))
    before = f1_per_class(confusion(pred, true))[true[i]]
    pred[i] = true[i]
    after = f1_per_class(confusion(pred, true))[true[i]]
    assert after >= before


def test_batched_f1_matches_single(rng):
    cms = rng.integers(0, 6, size=(30, 8, 8))
    batched = f1_per_class(cms)
    for cm, row in zip(cms, batched):
        np.testing.assert_array_equal(row, f1_per_class(cm))


def test_from_confusion_rejects_negative():
    cm = np.zeros((8, 8), dtype=int)
    cm[0, 1] = -1
    with pytest.raises(ValidationError):
        EvalReport.from_confusion(cm)

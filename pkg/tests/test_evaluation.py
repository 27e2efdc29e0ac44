import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from implicit_disco.corpus import Dataset, RelationInstance, filter_for_task
from implicit_disco.evaluation import (
    PredictionSet,
    accuracy,
    bootstrap_test,
    cross_validate,
    fold_assignment,
    majority_baseline,
    majority_label,
    render_comparison,
)
from implicit_disco.synthetic import MARKER_SCHEME


def preds(gold, pred):
    return PredictionSet(tuple(str(i) for i in range(len(gold))), tuple((g,) for g in gold), tuple(pred))


def dataset(labels):
    insts = [RelationInstance(("a",), ("b",), (lab,), id=f"i{n}") for n, lab in enumerate(labels)]
    return Dataset(MARKER_SCHEME, tuple(insts))


def test_accuracy_examples():
    assert accuracy(preds("ab", "ab")) == 1.0
    assert accuracy(preds("ab", "bb")) == 0.5
    with pytest.raises(ValueError):
        accuracy(preds("", ""))


def test_multi_gold_any_match():
    p = PredictionSet(("1", "2"), (("x", "y"), ("x",)), ("y", "y"))
    assert accuracy(p) == 0.5


def test_prediction_set_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        PredictionSet(("1", "1"), (("a",), ("a",)), ("a", "a"))
    with pytest.raises(ValueError):
        PredictionSet(("1",), (("a",), ("a",)), ("a", "a"))
    p = PredictionSet(("r1", "r2"), (("a", "b"), ("c",)), ("b", "a"))
    p.save(tmp_path / "p.jsonl")
    assert PredictionSet.load(tmp_path / "p.jsonl") == p


def test_majority_baseline():
    train = dataset(["Marked"] * 3 + ["Unmarked"] * 2)
    ev = dataset(["Marked", "Unmarked", "Unmarked", "Marked", "Unmarked"])
    assert majority_label(train) == "Marked"
    assert accuracy(majority_baseline(train, ev)) == 2 / 5
    # ties go to the lowest label index
    assert majority_label(dataset(["Marked", "Unmarked"])) == "Unmarked"


@pytest.mark.invariant
@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(MARKER_SCHEME.labels), min_size=1, max_size=20),
       st.lists(st.sampled_from(MARKER_SCHEME.labels), min_size=1, max_size=20))
def test_majority_accuracy_equals_count_ratio(train_labels, eval_labels):
    train, ev = dataset(train_labels), dataset(eval_labels)
    maj = majority_label(train)
    assert accuracy(majority_baseline(train, ev)) == eval_labels.count(maj) / len(eval_labels)


def exhaustive_p(correct_a, correct_b):
    diff = np.array(correct_a, int) - np.array(correct_b, int)
    n = len(diff)
    combos = list(itertools.product(range(n), repeat=n))
    return sum(diff[list(c)].sum() <= 0 for c in combos) / len(combos)


def test_bootstrap_matches_exhaustive_oracle():
    gold = "aaa"
    a, b = preds(gold, "abb"), preds(gold, "bbb")
    # a wins only on instance 0; a fails to beat b iff it is never drawn
    oracle = exhaustive_p([1, 0, 0], [0, 0, 0])
    assert oracle == pytest.approx(8 / 27)
    assert abs(bootstrap_test(a, b) - oracle) < 0.01


def test_bootstrap_mixed_oracle():
    gold = "aaaa"
    a, b = preds(gold, "aaba"), preds(gold, "abab")
    oracle = exhaustive_p([1, 1, 0, 1], [1, 0, 1, 0])
    assert abs(bootstrap_test(a, b, n_resamples=20000, seed=3) - oracle) < 0.01


def test_bootstrap_extremes():
    gold = "ab" * 10
    assert bootstrap_test(preds(gold, gold), preds(gold, "ba" * 10)) == 0.0
    assert bootstrap_test(preds(gold, "ba" * 10), preds(gold, gold)) == 1.0


def test_bootstrap_pairs_by_id():
    a = PredictionSet(("x", "y"), (("a",), ("a",)), ("a", "b"))
    b = PredictionSet(("y", "x"), (("a",), ("a",)), ("b", "b"))
    assert abs(bootstrap_test(a, b) - exhaustive_p([1, 0], [0, 0])) < 0.01
    with pytest.raises(ValueError):
        bootstrap_test(a, PredictionSet(("x", "z"), (("a",), ("a",)), ("b", "b")))


@pytest.mark.invariant
@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from("ab"), min_size=1, max_size=30), st.lists(st.sampled_from("ab"), min_size=30, max_size=30), st.integers(0, 100))
def test_bootstrap_identical_never_below_half(gold, pred, seed):
    p = preds(gold, pred[: len(gold)])
    assert bootstrap_test(p, p, n_resamples=500, seed=seed) >= 0.5


def test_bootstrap_deterministic():
    gold = "abab" * 5
    a, b = preds(gold, "abbb" * 5), preds(gold, "aaab" * 5)
    assert bootstrap_test(a, b, seed=4) == bootstrap_test(a, b, seed=4)


def test_fold_assignment_examples():
    folds = fold_assignment(7, 7, seed=0)
    assert sorted(len(f) for f in folds) == [1] * 7
    assert sorted(i for f in folds for i in f) == list(range(7))
    sizes = [len(f) for f in fold_assignment(23, 7, seed=1)]
    assert max(sizes) - min(sizes) <= 1
    with pytest.raises(ValueError):
        fold_assignment(3, 7)


@pytest.mark.invariant
@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12).flatmap(lambda k: st.tuples(st.just(k), st.integers(k, 80))), st.integers(0, 1000))
def test_fold_assignment_is_partition(kn, seed):
    k, n = kn
    folds = fold_assignment(n, k, seed)
    flat = [i for f in folds for i in f]
    assert len(flat) == len(set(flat)) == n
    assert set(flat) == set(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert fold_assignment(n, k, seed) == folds


def majority_fit(train, dev):
    return lambda ds: majority_baseline(train, ds)


def test_cv_seven_by_seven_each_held_out_once():
    labels = ["Marked", "Unmarked", "Marked", "Marked", "Unmarked", "Marked", "Unmarked"]
    ds = dataset(labels)
    seen = Counter()

    def fit(train, dev):
        assert len(train) == 5 and len(dev) == 1
        return lambda ev: (seen.update(i.id for i in ev), majority_baseline(train, ev))[1]

    res = cross_validate(ds, folds=7, fit=fit)
    assert len(res.fold_accuracies) == 7
    assert seen == Counter(f"i{n}" for n in range(7))


def test_cv_majority_matches_per_fold_oracle():
    rng = np.random.default_rng(0)
    labels = list(rng.choice(MARKER_SCHEME.labels, size=40, p=[0.3, 0.7]))
    ds = dataset(labels)
    res = cross_validate(ds, folds=7, fit=majority_fit, seed=5)
    folds = fold_assignment(40, 7, seed=5)
    expected = []
    for f in range(7):
        held = folds[f]
        dev = folds[(f + 1) % 7]
        train_labels = [labels[i] for i in range(40) if i not in held and i not in dev]
        counts = Counter(train_labels)
        maj = min(counts, key=lambda lab: (-counts[lab], MARKER_SCHEME.index(lab)))
        expected.append(sum(labels[i] == maj for i in held) / len(held))
    assert res.fold_accuracies == expected
    assert res.mean_accuracy == pytest.approx(np.mean(expected), abs=1e-15)


def test_cv_with_neural_training():
    from implicit_disco.models import ModelConfig
    from implicit_disco.synthetic import marker_task, toy_vectors
    from implicit_disco.training import TrainConfig

    ds = marker_task(35, seed=9, vocab_size=20)
    table = toy_vectors(k=6, vocab_size=20)
    res = cross_validate(ds, folds=7, model_config=ModelConfig("FF", "sum", k=6, hidden_dim=4, num_labels=2),
                         train_config=TrainConfig(learning_rate=0.1, max_epochs=3, patience=1), table=table)
    assert 0.0 <= res.mean_accuracy <= 1.0 and len(res.fold_accuracies) == 7


def test_filtered_dataset_gold_drives_accuracy():
    insts = [RelationInstance(("a",), ("b",), ("Expansion.Conjunction", "Contingency.Cause.Reason"), "Implicit", id="1")]
    ds = filter_for_task(insts, "CONLL-15")
    gold = tuple(ds.gold(i) for i in range(len(ds)))
    assert accuracy(PredictionSet(("1",), gold, ("Contingency.Cause.Reason",))) == 1.0
    ds_l2 = filter_for_task(insts, "PDTB-L2-11")
    gold = tuple(ds_l2.gold(i) for i in range(len(ds_l2)))
    assert accuracy(PredictionSet(("1",), gold, ("Contingency.Cause",))) == 0.0


def test_render_comparison():
    text = render_comparison([("Baseline", 0.2571), ("FF sum", 0.3956)], title="Test")
    assert "25.71" in text and "39.56" in text and text.startswith("Test")

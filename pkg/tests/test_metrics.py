import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from models.classifier import Classifier, ClassificationHead, FeatureExtractor
from models.data import ClassSplit, Dataset
from services.metrics import (
    accuracy,
    bias_report,
    bsc,
    evaluate_model,
    leakage_attack,
    mbg,
    mbs,
    rtr,
)
from utils.errors import InvalidInputError, ShapeError
from utils.numerics import make_rng


def _split(forgotten, count):
    return ClassSplit.from_forgotten(forgotten, count)


def _reference(bias, forgotten):
    """Brute-force metrics from plain Python lists."""
    b_v = [b for c, b in enumerate(bias) if c in forgotten]
    b_r = [b for c, b in enumerate(bias) if c not in forgotten]
    logistic = lambda t: 1.0 / (1.0 + np.exp(-t))
    return (
        100.0 / (1.0 + abs(sum(b_v) / len(b_v) - sum(b_r) / len(b_r))),
        100.0 * logistic(statistics.median(b_v) - min(b_r)),
        100.0 * logistic(min(b_v) - min(b_r)),
    )


def test_bsc_anchors():
    split = _split([0], 2)
    assert bsc([0.0, 0.0], split) == 100.0
    assert abs(bsc([-15.0, 0.0], split) - 6.25) < 1e-9
    assert abs(bsc([-25.0, 0.0], split) - 100.0 / 26.0) < 1e-9
    assert abs(bsc([-25.0, 0.0], split) - 3.846) < 1e-3


def test_rtr_anchors():
    assert rtr(2.0, 2.0) == 100.0
    assert rtr(1.0, 2.0) == 50.0
    assert abs(rtr(0.018, 1972.01) - 9.13e-4) < 1e-6
    with pytest.raises(InvalidInputError):
        rtr(0.0, 1.0)
    with pytest.raises(InvalidInputError):
        rtr(1.0, -1.0)


def test_mbg_examples():
    split = _split([0], 3)
    assert mbg([0.05, 0.05, 0.3], split) == 50.0
    assert_allclose(mbg([-14.7, 0.05, 0.3], split), 100.0 / (1.0 + np.exp(14.75)), rtol=1e-9)
    assert_allclose(mbg([1.05, 0.05, 0.3], split), 73.10585786300049, rtol=1e-12)


def test_mbg_median_of_even_set_is_mean_of_middle_pair():
    split = _split([0, 1, 2, 3], 5)
    bias = [0.0, 1.0, 2.0, 10.0, 0.0]
    assert_allclose(mbg(bias, split), 100.0 / (1.0 + np.exp(-1.5)))


def test_mbs_equals_mbg_for_single_forgotten_class():
    rng = make_rng(0)
    for _ in range(200):
        bias = rng.normal(0.0, 3.0, 6)
        split = _split([int(rng.integers(0, 6))], 6)
        assert mbs(bias, split) == mbg(bias, split)


def test_metrics_match_brute_force():
    rng = make_rng(1)
    for _ in range(10_000):
        count = int(rng.integers(2, 12))
        size = int(rng.integers(1, count))
        forgotten = set(rng.choice(count, size=size, replace=False).tolist())
        bias = rng.normal(0.0, 5.0, count)
        split = _split(forgotten, count)
        expected = _reference(bias.tolist(), forgotten)
        got = (bsc(bias, split), mbg(bias, split), mbs(bias, split))
        assert_allclose(got, expected, rtol=0, atol=1e-12)


finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


@given(st.lists(finite, min_size=3, max_size=8), finite, st.integers(min_value=1, max_value=2))
def test_metrics_ignore_common_offset(bias, offset, size):
    split = _split(range(size), len(bias))
    shifted = [b + offset for b in bias]
    for metric in (bsc, mbg, mbs):
        assert_allclose(metric(shifted, split), metric(bias, split), rtol=1e-6, atol=1e-9)


@given(st.lists(finite, min_size=3, max_size=8))
def test_mbs_never_exceeds_mbg(bias):
    split = _split([0, 1], len(bias))
    assert mbs(bias, split) <= mbg(bias, split)


def test_metric_monotonicity():
    split = _split([0], 3)
    gaps = [0.0, 0.5, 1.0, 2.0, 4.0]
    bscs = [bsc([-g, 0.0, 1.0], split) for g in gaps]
    assert all(a > b for a, b in zip(bscs, bscs[1:]))
    mbgs = [mbg([g, 0.0, 1.0], split) for g in gaps]
    assert all(a < b for a, b in zip(mbgs, mbgs[1:]))


def test_metrics_check_lengths():
    with pytest.raises(ShapeError):
        bsc([0.0, 1.0], _split([0], 3))


def test_leakage_attack():
    assert leakage_attack([0.1, 0.2, -14.7], 1) == frozenset({2})
    assert leakage_attack([0.0, 0.0, 0.0, 1.0], 2) == frozenset({0, 1})
    with pytest.raises(InvalidInputError):
        leakage_attack([0.0, 1.0], 2)
    with pytest.raises(InvalidInputError):
        leakage_attack([0.0, 1.0], 0)


def test_leakage_attack_on_random_biases_is_at_chance():
    classes, draws, target = 10, 1000, 3
    hits = sum(target in leakage_attack(make_rng([seed, 5]).random(classes), 1) for seed in range(draws))
    p = 1.0 / classes
    error = 3.0 * np.sqrt(p * (1 - p) / draws)
    assert abs(hits / draws - p) <= error


def test_bias_report_verdicts():
    split = _split([2], 3)
    shifted = bias_report([0.1, 0.2, -14.7], split)
    assert shifted.leakage_exact_match
    assert shifted.mbs < 1e-3
    assert shifted.verdict.startswith("suppressed")
    clean = bias_report([0.1, 0.2, 0.3], split)
    assert not clean.leakage_exact_match
    assert clean.verdict == "no bias shortcut detected"
    assert clean.as_dict()["leakage_prediction"] == [0]


def _constant_model(bias):
    bias = np.asarray(bias, dtype=float)
    return Classifier(FeatureExtractor(1, []), ClassificationHead(np.zeros((bias.size, 1)), bias))


def test_accuracy_of_constant_model_is_one_over_c():
    data = Dataset(np.zeros((8, 1)), np.tile(np.arange(4), 2), 4)
    assert accuracy(_constant_model([0.0, 0.0, 0.0, 0.0]), data) == 25.0
    with pytest.raises(InvalidInputError):
        accuracy(_constant_model([0.0, 0.0]), data.subset(np.zeros(8, dtype=bool)))


def test_evaluate_flags_suppressed_shortcut():
    split = _split([2], 3)
    retain = Dataset(np.zeros((4, 1)), [0, 0, 0, 0], 3)
    forget = Dataset(np.zeros((2, 1)), [2, 2], 3)
    shortcut = evaluate_model(_constant_model([1.0, 0.0, -14.7]), retain, forget, split, elapsed=0.5, t_retrain=2.0)
    assert shortcut.retain_acc == 100.0 and shortcut.forget_acc == 0.0
    assert shortcut.bias_dominated_suspected
    assert shortcut.rtr == 25.0
    honest = evaluate_model(_constant_model([0.0, 0.0, 1.0]), retain, forget, split)
    assert not honest.bias_dominated_suspected
    assert honest.rtr is None and honest.elapsed is None
    again = evaluate_model(_constant_model([0.0, 0.0, 1.0]), retain, forget, split)
    assert again.as_dict() == honest.as_dict()

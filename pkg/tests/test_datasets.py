import itertools

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from models.classifier import Architecture
from models.data import Dataset
from services.datasets import hold_out, make_blobs, make_blobs_split, place_centers, split_by_classes
from services.metrics import accuracy
from services.training import train_origin
from utils.errors import ConfigError, InvalidSplitError
from utils.numerics import make_rng


def _balanced(classes=10, per_class=10):
    labels = np.tile(np.arange(classes), per_class)
    features = np.arange(labels.size * 2, dtype=float).reshape(-1, 2)
    return Dataset(features, labels, classes)


def test_make_blobs_counts():
    data = make_blobs(2, 10, 2, 5.0, make_rng(7))
    assert len(data) == 20
    assert np.bincount(data.labels).tolist() == [10, 10]


def test_make_blobs_is_deterministic():
    a = make_blobs(3, 5, 4, 2.0, make_rng(7))
    b = make_blobs(3, 5, 4, 2.0, make_rng(7))
    assert_array_equal(a.features, b.features)
    assert_array_equal(a.labels, b.labels)


@pytest.mark.parametrize("separation", [6.0, 0.3, 1e3])
@pytest.mark.parametrize("seed", range(25))
def test_centers_are_separated(seed, separation):
    centers = place_centers(10, 16, separation, make_rng(seed))
    for i, j in itertools.combinations(range(10), 2):
        assert np.linalg.norm(centers[i] - centers[j]) >= separation


def test_dim_too_small_is_a_config_error():
    with pytest.raises(ConfigError):
        make_blobs(5, 10, 3, 4.0, make_rng(0))
    with pytest.raises(ConfigError):
        make_blobs(2, 10, 2, 0.0, make_rng(0))


def test_split_train_and_test_share_centers():
    train, test = make_blobs_split(3, 50, 3, 40.0, make_rng(1))
    for c in range(3):
        gap = train.features[train.labels == c].mean(axis=0) - test.features[test.labels == c].mean(axis=0)
        assert np.linalg.norm(gap) < 1.0


def test_wide_separation_is_linearly_separable():
    data = make_blobs(3, 20, 3, 50.0, make_rng(4))
    model = train_origin(Architecture(3, 3, ()), data, 50, 0.05, 8, make_rng(5))
    assert accuracy(model, data) == 100.0


@pytest.mark.parametrize("forgotten, sizes", [([5], (90, 10)), ([3, 4, 5], (70, 30))])
def test_split_by_classes_sizes(forgotten, sizes):
    retain, forget = split_by_classes(_balanced(), forgotten)
    assert (len(retain), len(forget)) == sizes
    assert set(forget.labels.tolist()) == set(forgotten)
    assert not set(retain.labels.tolist()) & set(forgotten)


def test_split_by_classes_is_an_ordered_partition():
    data = _balanced()
    retain, forget = split_by_classes(data, [0, 7])
    merged = np.concatenate([retain.features[:, 0], forget.features[:, 0]])
    assert sorted(merged) == sorted(data.features[:, 0])
    assert np.all(np.diff(retain.features[:, 0]) > 0)
    assert np.all(np.diff(forget.features[:, 0]) > 0)


@pytest.mark.parametrize("forgotten", [[], list(range(10))])
def test_split_by_classes_rejects_degenerate_sets(forgotten):
    with pytest.raises(InvalidSplitError):
        split_by_classes(_balanced(), forgotten)


def test_hold_out_is_stratified_and_disjoint():
    data = _balanced(per_class=10)
    held, rest = hold_out(data, 0.3, make_rng(4))
    assert np.bincount(held.labels, minlength=10).tolist() == [3] * 10
    assert np.bincount(rest.labels, minlength=10).tolist() == [7] * 10
    seen = np.concatenate([held.features[:, 0], rest.features[:, 0]])
    assert sorted(seen.tolist()) == data.features[:, 0].tolist()
    assert np.all(np.diff(held.features[:, 0]) > 0)


def test_hold_out_is_seeded():
    data = _balanced()
    a, _ = hold_out(data, 0.5, make_rng(1))
    b, _ = hold_out(data, 0.5, make_rng(1))
    c, _ = hold_out(data, 0.5, make_rng(2))
    assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
def test_hold_out_rejects_degenerate_fractions(fraction):
    with pytest.raises(ConfigError):
        hold_out(_balanced(), fraction, make_rng(0))

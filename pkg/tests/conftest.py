"""Shared fixtures: a small blobs problem and a briefly trained model."""
import pytest

from models.classifier import Architecture, init_classifier
from models.data import ClassSplit
from services.datasets import make_blobs_split, split_by_classes
from services.training import train_origin
from utils.numerics import make_rng

CLASS_COUNT = 4
DIM = 6
FORGOTTEN = (1,)


@pytest.fixture
def rng():
    return make_rng(7)


@pytest.fixture(scope="session")
def blobs():
    """(train, test) blobs: 4 classes x 30 samples in 6 dimensions."""
    return make_blobs_split(CLASS_COUNT, 30, DIM, 6.0, make_rng(11))


@pytest.fixture(scope="session")
def split():
    return ClassSplit.from_forgotten(FORGOTTEN, CLASS_COUNT)


@pytest.fixture(scope="session")
def parts(blobs, split):
    """(retain_train, forget_train, retain_test, forget_test)."""
    train, test = blobs
    retain_train, forget_train = split_by_classes(train, split)
    retain_test, forget_test = split_by_classes(test, split)
    return retain_train, forget_train, retain_test, forget_test


@pytest.fixture
def arch():
    return Architecture(DIM, CLASS_COUNT, (8, 5))


@pytest.fixture
def model(arch, rng):
    return init_classifier(arch, rng)


@pytest.fixture(scope="session")
def origin(blobs):
    """Model trained on the full blobs training set. Treat as read-only."""
    train, _ = blobs
    return train_origin(Architecture(DIM, CLASS_COUNT, (8, 5)), train, 40, 0.1, 16, make_rng(3))

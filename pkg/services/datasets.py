"""
Synthetic Gaussian-blob datasets and class-based retain/forget splitting.
"""
import logging
from typing import Iterable, Tuple, Union

import numpy as np

import config
from models.data import ClassSplit, Dataset
from utils.errors import ConfigError
from utils.numerics import SeededRng

logger = logging.getLogger(__name__)

CENTER_MARGIN = 1e-9


def place_centers(class_count: int, dim: int, separation: float, rng: SeededRng) -> np.ndarray:
    """
    Class centers pairwise at least `separation` apart.

    Center k is (separation / sqrt(2)) * e_k under a random rotation of R^dim,
    so dim must be at least class_count. The scale carries a relative margin of
    CENTER_MARGIN so rotation round-off never lands a pair below `separation`.

    Returns:
        (class_count x dim) array
    """
    if class_count < 1 or dim < 1:
        raise ConfigError("class_count and dim must be positive")
    if not separation > 0:
        raise ConfigError(f"separation must be > 0, got {separation}")
    if dim < class_count:
        raise ConfigError(
            f"dim {dim} is too small to place {class_count} equidistant centers (need dim >= class_count)"
        )
    # QR of a Gaussian matrix gives a random orthogonal basis
    rotation, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    basis = np.eye(dim)[:class_count] * (separation / np.sqrt(2.0) * (1.0 + CENTER_MARGIN))
    return basis @ rotation.T


def sample_blobs(centers: np.ndarray, per_class: int, spread: float, rng: SeededRng) -> Dataset:
    """Draw per_class isotropic Gaussian points around each center, class by class."""
    if per_class < 1:
        raise ConfigError("per_class must be positive")
    if not spread > 0:
        raise ConfigError(f"spread must be > 0, got {spread}")
    class_count, dim = centers.shape
    features = np.concatenate([
        center + spread * rng.standard_normal((per_class, dim)) for center in centers
    ])
    labels = np.repeat(np.arange(class_count), per_class)
    return Dataset(features, labels, class_count)


def make_blobs(
    class_count: int,
    per_class: int,
    dim: int,
    separation: float,
    rng: SeededRng,
    spread: float = config.BLOBS_SPREAD,
) -> Dataset:
    """
    Balanced blobs dataset, deterministic given the generator state.

    Raises:
        ConfigError: non-positive counts, separation or spread, or dim < class_count
    """
    centers = place_centers(class_count, dim, separation, rng)
    return sample_blobs(centers, per_class, spread, rng)


def make_blobs_split(
    class_count: int,
    per_class: int,
    dim: int,
    separation: float,
    rng: SeededRng,
    spread: float = config.BLOBS_SPREAD,
) -> Tuple[Dataset, Dataset]:
    """Training set plus an equally sized held-out set around the same centers."""
    centers = place_centers(class_count, dim, separation, rng)
    train = sample_blobs(centers, per_class, spread, rng)
    test = sample_blobs(centers, per_class, spread, rng)
    logger.info(
        "blobs: %d classes x %d samples, dim %d, separation %.2f",
        class_count, per_class, dim, separation,
    )
    return train, test


def split_by_classes(data: Dataset, forgotten: Union[ClassSplit, Iterable[int]]) -> Tuple[Dataset, Dataset]:
    """
    Partition a dataset by label.

    Args:
        data: full dataset
        forgotten: forgotten labels V (or a ClassSplit)

    Returns:
        (retain, forget), each in input order

    Raises:
        InvalidSplitError: V empty, out of range, or covering every class
    """
    if not isinstance(forgotten, ClassSplit):
        forgotten = ClassSplit.from_forgotten(forgotten, data.class_count)
    in_forget = np.isin(data.labels, forgotten.forgotten_index)
    return data.subset(~in_forget), data.subset(in_forget)


def hold_out(data: Dataset, fraction: float, rng: SeededRng) -> Tuple[Dataset, Dataset]:
    """
    Stratified hold-out: round(fraction * n_c) random samples of every class c.

    Returns:
        (held_out, rest), each in input order

    Raises:
        ConfigError: fraction outside (0, 1)
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"hold-out fraction must lie in (0, 1), got {fraction}")
    chosen = np.zeros(len(data), dtype=bool)
    for label in np.unique(data.labels):
        members = np.flatnonzero(data.labels == label)
        count = int(round(fraction * members.size))
        chosen[rng.choice(members, size=count, replace=False)] = True
    return data.subset(chosen), data.subset(~chosen)

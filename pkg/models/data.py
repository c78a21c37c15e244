"""
Data containers: labelled datasets, mini-batches and class partitions.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Iterator, NamedTuple, Tuple

import numpy as np

from utils.errors import InvalidInputError, InvalidSplitError, ShapeError
from utils.numerics import SeededRng


class Batch(NamedTuple):
    """A mini-batch: features (N x D) and integer labels (N)."""
    features: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[np.ndarray, int]]) -> "Batch":
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("batch is empty")
        features = np.stack([np.asarray(x, dtype=np.float64) for x, _ in pairs])
        labels = np.asarray([int(y) for _, y in pairs], dtype=np.int64)
        return cls(features, labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class Dataset:
    """
    Labelled samples. Arrays are made read-only on construction.

    Attributes:
        features: float64 array (N x D)
        labels: int64 array (N), every label < class_count
        class_count: number of classes C of the label space
    """
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ShapeError(
                f"{labels.shape[0] if labels.ndim else 0} labels for {features.shape[0]} samples"
            )
        if self.class_count < 1:
            raise InvalidInputError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InvalidInputError(f"labels must lie in [0, {self.class_count})")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.features[mask], self.labels[mask], self.class_count)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.class_count != self.class_count:
            raise ShapeError("cannot concatenate datasets over different label spaces")
        return Dataset(
            np.concatenate([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            self.class_count,
        )

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.features, labels, self.class_count)

    def batches(self, batch_size: int, rng: SeededRng = None) -> Iterator[Batch]:
        """
        Yield mini-batches; shuffled when rng is given, in order otherwise.
        The last batch may be smaller.
        """
        if batch_size < 1:
            raise InvalidInputError("batch_size must be positive")
        n = len(self)
        order = rng.permutation(n) if rng is not None else np.arange(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            yield Batch(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class ClassSplit:
    """
    Partition of the label space {0..C-1} into forgotten (V) and retained (R).
    """
    forgotten: FrozenSet[int]
    retained: FrozenSet[int]
    class_count: int = field(default=0)

    def __post_init__(self):
        forgotten = frozenset(int(c) for c in self.forgotten)
        retained = frozenset(int(c) for c in self.retained)
        count = self.class_count or len(forgotten | retained)
        if not forgotten:
            raise InvalidSplitError("forgotten class set is empty")
        if not retained:
            raise InvalidSplitError("retained class set is empty (all classes forgotten)")
        if forgotten & retained:
            raise InvalidSplitError(f"classes {sorted(forgotten & retained)} are both forgotten and retained")
        if forgotten | retained != frozenset(range(count)):
            raise InvalidSplitError(f"split does not cover exactly the labels 0..{count - 1}")
        object.__setattr__(self, "forgotten", forgotten)
        object.__setattr__(self, "retained", retained)
        object.__setattr__(self, "class_count", count)

    @classmethod
    def from_forgotten(cls, forgotten: Iterable[int], class_count: int) -> "ClassSplit":
        forgotten = frozenset(int(c) for c in forgotten)
        outside = [c for c in forgotten if c < 0 or c >= class_count]
        if outside:
            raise InvalidSplitError(f"forgotten classes {sorted(outside)} outside 0..{class_count - 1}")
        retained = frozenset(range(class_count)) - forgotten
        return cls(forgotten, retained, class_count)

    @property
    def forgotten_index(self) -> np.ndarray:
        """Sorted forgotten labels as an index array."""
        return np.array(sorted(self.forgotten), dtype=np.int64)

    @property
    def retained_index(self) -> np.ndarray:
        return np.array(sorted(self.retained), dtype=np.int64)

"""
Numerical helpers shared by the model, metrics and data modules.

Matrices and vectors are plain float64 numpy arrays. Random numbers always
come from a numpy Generator backed by PCG64 (O'Neill's permuted congruential
generator), seeded explicitly so runs are bit-reproducible.
"""
from typing import Sequence, Union

import numpy as np
from scipy import special

from utils.errors import InvalidInputError, ShapeError

SeededRng = np.random.Generator
SeedLike = Union[int, Sequence[int]]


def make_rng(seed: SeedLike) -> SeededRng:
    """
    Build the project's seeded generator.

    Args:
        seed: 64-bit unsigned integer, or a sequence of them to derive
              an independent stream (e.g. [seed, 1])

    Returns:
        numpy Generator over PCG64
    """
    return np.random.Generator(np.random.PCG64(seed))


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Convert to a non-empty finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Convert to a non-empty finite 2-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def softmax(logits) -> np.ndarray:
    """
    Softmax of a logit vector.

    The maximum logit is subtracted before exponentiation (scipy does this
    internally), so large logits do not overflow.
    """
    z = as_vector(logits, "logits")
    return special.softmax(z)


def log_softmax(logits) -> np.ndarray:
    """Log-probabilities via log-sum-exp; finite for any finite logits."""
    z = as_vector(logits, "logits")
    return special.log_softmax(z)


def sigmoid(x: float) -> float:
    """Logistic function, branch-stable for |x| up to and beyond 1e6."""
    value = float(x)
    if not np.isfinite(value):
        raise InvalidInputError(f"sigmoid input must be finite, got {x!r}")
    return float(special.expit(value))


def affine(W, x, b) -> np.ndarray:
    """
    Compute W @ x + b.

    Args:
        W: matrix (rows x cols)
        x: vector of length cols
        b: vector of length rows

    Returns:
        vector of length rows
    """
    W = as_matrix(W, "W")
    x = as_vector(x, "x")
    b = as_vector(b, "b")
    if W.shape[1] != x.shape[0]:
        raise ShapeError(f"W has {W.shape[1]} columns but x has length {x.shape[0]}")
    if W.shape[0] != b.shape[0]:
        raise ShapeError(f"W has {W.shape[0]} rows but b has length {b.shape[0]}")
    return W @ x + b

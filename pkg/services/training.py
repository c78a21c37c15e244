"""
Mini-batch SGD loops shared by origin training and the unlearning methods.
"""
import logging
from typing import Callable, Optional

import numpy as np

from models.classifier import (
    STANDARD,
    Architecture,
    Classifier,
    Gradients,
    GradientMode,
    backward,
    init_classifier,
    sgd_step,
)
from models.data import Dataset
from services.metrics import accuracy
from utils.errors import ConfigError, InvalidInputError, NumericError
from utils.numerics import SeededRng

logger = logging.getLogger(__name__)

# Called with (epoch, mean loss) after every epoch
EpochCallback = Callable[[int, float], None]


def _apply(model: Classifier, grads: Gradients, eta: float, epoch: int):
    if not np.isfinite(grads.loss):
        raise NumericError("loss diverged", epoch=epoch)
    try:
        sgd_step(model, grads, eta)
    except NumericError as e:
        raise NumericError(str(e), epoch=epoch) from e


def train_epochs(
    model: Classifier,
    data: Dataset,
    epochs: int,
    eta: float,
    rng: SeededRng,
    batch_size: int,
    mode: GradientMode = STANDARD,
    on_epoch: Optional[EpochCallback] = None,
) -> Classifier:
    """
    Run `epochs` passes of shuffled mini-batch SGD over `data`, in place.

    Raises:
        ConfigError: epochs < 1
        InvalidInputError: empty dataset
        NumericError: non-finite loss or gradient (carries the 1-based epoch)
    """
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if len(data) == 0:
        raise InvalidInputError("cannot train on an empty dataset")

    for epoch in range(1, epochs + 1):
        losses = []
        for batch in data.batches(batch_size, rng):
            grads = backward(model, batch, mode)
            _apply(model, grads, eta, epoch)
            losses.append(grads.loss)
        mean_loss = float(np.mean(losses))
        logger.debug("epoch %d/%d loss %.6f", epoch, epochs, mean_loss)
        if on_epoch:
            on_epoch(epoch, mean_loss)
    return model


def train_mixed_epochs(
    model: Classifier,
    retain: Dataset,
    forget: Dataset,
    epochs: int,
    eta: float,
    retain_rng: SeededRng,
    forget_rng: SeededRng,
    batch_size: int,
    retention_weight: float,
) -> Classifier:
    """
    Descend on w * L(retain batch) - (1 - w) * L(forget batch), in place.

    One step per retain batch; forget batches cycle through a reshuffled
    stream of their own.
    """
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if len(retain) == 0 or len(forget) == 0:
        raise InvalidInputError("mixed training needs non-empty retain and forget sets")

    forget_batches = forget.batches(batch_size, forget_rng)
    for epoch in range(1, epochs + 1):
        for retain_batch in retain.batches(batch_size, retain_rng):
            forget_batch = next(forget_batches, None)
            if forget_batch is None:
                forget_batches = forget.batches(batch_size, forget_rng)
                forget_batch = next(forget_batches)
            grads = backward(model, retain_batch).combine(
                retention_weight, backward(model, forget_batch), -(1.0 - retention_weight)
            )
            _apply(model, grads, eta, epoch)
        logger.debug("mixed epoch %d/%d done", epoch, epochs)
    return model


def ascend_until_forgotten(
    model: Classifier,
    forget: Dataset,
    max_epochs: int,
    eta: float,
    rng: SeededRng,
    batch_size: int,
    mode: GradientMode = STANDARD,
) -> int:
    """
    Gradient ascent on `forget`, in place: theta <- theta + eta * g.

    Stops after the first epoch that leaves every sample of `forget`
    misclassified, or after max_epochs. Under BiasReversal the forgotten-class
    biases move along the descent direction instead.

    Returns:
        number of epochs run
    """
    if max_epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {max_epochs}")
    if len(forget) == 0:
        raise InvalidInputError("cannot ascend on an empty dataset")

    for epoch in range(1, max_epochs + 1):
        for batch in forget.batches(batch_size, rng):
            _apply(model, backward(model, batch, mode).negated(), eta, epoch)
        remaining = accuracy(model, forget)
        logger.debug("ascent epoch %d/%d forget accuracy %.2f", epoch, max_epochs, remaining)
        if remaining == 0.0:
            return epoch
    return max_epochs


def train_origin(
    arch: Architecture,
    data: Dataset,
    epochs: int,
    eta: float,
    batch_size: int,
    rng: SeededRng,
) -> Classifier:
    """Initialise from rng and train on the full dataset."""
    model = init_classifier(arch, rng)
    logger.info("training %s for %d epochs (eta %.3g, batch %d)", arch, epochs, eta, batch_size)
    return train_epochs(model, data, epochs, eta, rng, batch_size)

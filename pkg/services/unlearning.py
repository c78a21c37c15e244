"""
Class-level unlearning methods.

Every method starts from a clone of the original model, never mutates it,
and returns an UnlearnOutcome timed around the method body only.

| Method            | Trains        | Data                          |
|-------------------|---------------|-------------------------------|
| retrain           | all (fresh)   | retain                        |
| fine_tune         | all           | retain                        |
| shallow_fine_tune | head          | retain                        |
| neg_grad_plus     | all           | retain (descent), forget (ascent) |
| random_label      | all           | retain + relabeled forget     |
| bias_shift        | -             | subtracts beta from b_V       |
| ts_bgm            | head          | forget (ascent), then retain  |
| ts_bgrm           | head          | forget (ascent, b_V gradient reversed), then retain |
| lb_hr             | head          | retain, hinge on b_V >= b_min |
"""
import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, FrozenSet, Optional, Union

import numpy as np

import config
from models.classifier import (
    STANDARD,
    Architecture,
    BiasReversal,
    Classifier,
    HingeBound,
    init_classifier,
)
from models.data import ClassSplit, Dataset
from services.metrics import accuracy
from services.training import ascend_until_forgotten, train_epochs, train_mixed_epochs
from utils.errors import ConfigError, InvalidSplitError
from utils.numerics import SeededRng, make_rng
from utils.timer import timed

logger = logging.getLogger(__name__)

AUTO = "auto"


class Method(str, Enum):
    RETRAIN = "retrain"
    FINE_TUNE = "fine_tune"
    SHALLOW_FINE_TUNE = "shallow_fine_tune"
    NEG_GRAD_PLUS = "neg_grad_plus"
    RANDOM_LABEL = "random_label"
    BIAS_SHIFT = "bias_shift"
    TS_BGM = "ts_bgm"
    TS_BGRM = "ts_bgrm"
    LB_HR = "lb_hr"

    @property
    def label(self) -> str:
        return METHOD_LABELS[self]

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown method '{name}' (known: {known})") from None


METHOD_LABELS: Dict[Method, str] = {
    Method.RETRAIN: "Retrain",
    Method.FINE_TUNE: "FT",
    Method.SHALLOW_FINE_TUNE: "SF",
    Method.NEG_GRAD_PLUS: "NegGrad+",
    Method.RANDOM_LABEL: "Random-label",
    Method.BIAS_SHIFT: "BiasShift",
    Method.TS_BGM: "TS-BGM",
    Method.TS_BGRM: "TS-BGRM",
    Method.LB_HR: "LB-HR",
}

_SGD = frozenset({"eta", "epochs", "batch_size"})
_TWO_STAGE = frozenset({"eta", "destroy_eta", "destroy_epochs", "repair_epochs", "batch_size"})

# Hyperparameters each method accepts (seed is always accepted)
METHOD_FIELDS: Dict[Method, FrozenSet[str]] = {
    Method.RETRAIN: _SGD,
    Method.FINE_TUNE: _SGD,
    Method.SHALLOW_FINE_TUNE: _SGD,
    Method.NEG_GRAD_PLUS: _SGD | {"retention_weight"},
    Method.RANDOM_LABEL: _SGD,
    Method.BIAS_SHIFT: frozenset({"beta"}),
    Method.TS_BGM: _TWO_STAGE,
    Method.TS_BGRM: _TWO_STAGE,
    Method.LB_HR: _SGD | {"lam", "b_min"},
}

HYPERPARAMETERS = (
    "eta", "destroy_eta", "epochs", "destroy_epochs", "repair_epochs", "batch_size",
    "beta", "lam", "b_min", "retention_weight",
)


def _defaults(method: Method) -> dict:
    if method is Method.RETRAIN:
        return {"eta": config.TRAIN_ETA, "epochs": config.RETRAIN_EPOCHS, "batch_size": config.TRAIN_BATCH_SIZE}
    if method is Method.NEG_GRAD_PLUS:
        return {
            "eta": config.NEGGRAD_ETA,
            "epochs": config.NEGGRAD_EPOCHS,
            "batch_size": config.NEGGRAD_BATCH_SIZE,
            "retention_weight": config.NEGGRAD_RETENTION_WEIGHT,
        }
    if method is Method.RANDOM_LABEL:
        return {
            "eta": config.RANDOM_LABEL_ETA,
            "epochs": config.RANDOM_LABEL_EPOCHS,
            "batch_size": config.RANDOM_LABEL_BATCH_SIZE,
        }
    if method in (Method.TS_BGM, Method.TS_BGRM):
        return {
            "eta": config.REPAIR_ETA,
            "destroy_eta": config.DESTROY_ETA,
            "destroy_epochs": config.DESTROY_EPOCHS,
            "repair_epochs": config.REPAIR_EPOCHS,
            "batch_size": config.TWO_STAGE_BATCH_SIZE,
        }
    values = {
        "eta": config.UNLEARN_ETA,
        "epochs": config.UNLEARN_EPOCHS,
        "batch_size": config.UNLEARN_BATCH_SIZE,
        "beta": AUTO,
        "lam": config.LBHR_LAMBDA,
        "b_min": AUTO,
    }
    return {k: v for k, v in values.items() if k in METHOD_FIELDS[method]}


@dataclass(frozen=True)
class UnlearnConfig:
    """
    Hyperparameters of one unlearning method.

    A field is set iff the method uses it. beta and b_min also accept "auto",
    resolved by run_method before the method is timed. For the two-stage
    methods eta is the repair rate and destroy_eta the ascent rate.
    """
    method: Method
    eta: Optional[float] = None
    destroy_eta: Optional[float] = None
    epochs: Optional[int] = None
    destroy_epochs: Optional[int] = None
    repair_epochs: Optional[int] = None
    batch_size: Optional[int] = None
    beta: Optional[Union[float, str]] = None
    lam: Optional[float] = None
    b_min: Optional[Union[float, str]] = None
    retention_weight: Optional[float] = None
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        method = Method.parse(self.method) if not isinstance(self.method, Method) else self.method
        object.__setattr__(self, "method", method)
        used = METHOD_FIELDS[method]
        for name in HYPERPARAMETERS:
            value = getattr(self, name)
            if name in used and value is None:
                raise ConfigError(f"{method.value}: missing '{name}'")
            if name not in used and value is not None:
                raise ConfigError(f"{method.value}: '{name}' does not apply to this method")
        self._check_values()

    def _check_values(self):
        name = self.method.value
        for key in ("eta", "destroy_eta"):
            value = getattr(self, key)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name}: {key} must be > 0, got {value}")
        for key in ("epochs", "destroy_epochs", "repair_epochs", "batch_size"):
            value = getattr(self, key)
            if value is not None and (int(value) != value or value < 1):
                raise ConfigError(f"{name}: {key} must be an integer >= 1, got {value}")
        if self.beta is not None and self.beta != AUTO and not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"{name}: beta must be > 0 or 'auto', got {self.beta}")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"{name}: lambda must be >= 0, got {self.lam}")
        if self.b_min is not None and self.b_min != AUTO and not np.isfinite(self.b_min):
            raise ConfigError(f"{name}: b_min must be finite or 'auto', got {self.b_min}")
        if self.retention_weight is not None and not 0.0 <= self.retention_weight <= 1.0:
            raise ConfigError(f"{name}: retention_weight must lie in [0, 1], got {self.retention_weight}")
        if self.seed < 0:
            raise ConfigError(f"{name}: seed must be >= 0, got {self.seed}")

    @classmethod
    def for_method(cls, method: Union[Method, str], seed: int = config.DEFAULT_SEED, **overrides) -> "UnlearnConfig":
        """Config with the project defaults for `method`, then `overrides`."""
        method = method if isinstance(method, Method) else Method.parse(method)
        values = _defaults(method)
        values.update(overrides)
        return cls(method=method, seed=seed, **values)

    def snapshot(self) -> dict:
        values = {"method": self.method.value, "seed": self.seed}
        values.update({k: getattr(self, k) for k in HYPERPARAMETERS if getattr(self, k) is not None})
        return values


@dataclass
class UnlearnOutcome:
    model: Classifier
    elapsed_seconds: float
    method: Method
    config: UnlearnConfig


def _run_timed(cfg: UnlearnConfig, body: Callable[..., Classifier], *args) -> UnlearnOutcome:
    logger.info("%s: start", cfg.method.label)
    model, elapsed = timed(body)(*args)
    logger.info("%s: done in %.6f s", cfg.method.label, elapsed)
    return UnlearnOutcome(model, elapsed, cfg.method, cfg)


def _require(cfg: UnlearnConfig, method: Method):
    if cfg.method is not method:
        raise ConfigError(f"config is for {cfg.method.value}, not {method.value}")


# ============================================
# BIAS SHIFT
# ============================================

def shift_biases(model: Classifier, split: ClassSplit, delta: float) -> Classifier:
    """Clone with b_c - delta for every forgotten class c (delta may be negative)."""
    shifted = model.clone()
    shifted.head.bias[split.forgotten_index] -= delta
    return shifted


def bias_shift(origin: Classifier, split: ClassSplit, beta: float) -> UnlearnOutcome:
    """Subtract beta > 0 from the forgotten-class biases; nothing else changes."""
    cfg = UnlearnConfig.for_method(Method.BIAS_SHIFT, beta=beta)
    if cfg.beta == AUTO:
        raise ConfigError("bias_shift needs a numeric beta; resolve 'auto' with calibrate_beta")
    return _run_timed(cfg, shift_biases, origin, split, float(beta))


def calibrate_beta(
    origin: Classifier,
    split: ClassSplit,
    calibration: Dataset,
    start: float = config.BETA_AUTO_START,
    cap: float = config.BETA_AUTO_CAP,
    margin: float = config.BETA_AUTO_MARGIN,
) -> float:
    """
    margin times the smallest beta in start, 2*start, 4*start, ... (up to cap)
    that brings accuracy on the calibration set to 0.

    The calibration set holds forgotten-class samples kept apart from every
    set the result is evaluated on.

    Raises:
        ConfigError: cap reached without zero accuracy, or margin < 1
    """
    if margin < 1.0:
        raise ConfigError(f"auto beta margin must be >= 1, got {margin}")
    if len(calibration) == 0:
        raise ConfigError("auto beta needs a non-empty calibration set")
    beta = start
    while beta <= cap:
        if accuracy(shift_biases(origin, split, beta), calibration) == 0.0:
            logger.info("auto beta: zero calibration accuracy at %g, using %g", beta, beta * margin)
            return beta * margin
        beta *= 2.0
    raise ConfigError(f"auto beta: forget accuracy still above 0 at the cap {cap:g}")


# ============================================
# FINE-TUNING BASELINES
# ============================================

def _fine_tune_body(model: Classifier, retain: Dataset, cfg: UnlearnConfig) -> Classifier:
    return train_epochs(model, retain, cfg.epochs, cfg.eta, make_rng(cfg.seed), cfg.batch_size)


def fine_tune(origin: Classifier, retain: Dataset, cfg: UnlearnConfig) -> UnlearnOutcome:
    """Continue training every parameter on the retain set."""
    _require(cfg, Method.FINE_TUNE)
    return _run_timed(cfg, lambda: _fine_tune_body(origin.clone(), retain, cfg))


def shallow_fine_tune(origin: Classifier, retain: Dataset, cfg: UnlearnConfig) -> UnlearnOutcome:
    """Fine-tune the head only; the extractor is frozen."""
    _require(cfg, Method.SHALLOW_FINE_TUNE)
    return _run_timed(cfg, lambda: _fine_tune_body(origin.frozen_copy(), retain, cfg))


def retrain(
    arch: Architecture,
    retain: Dataset,
    cfg: UnlearnConfig,
    rng: Optional[SeededRng] = None,
) -> UnlearnOutcome:
    """Train a fresh model on the retain set; its time is the RTR reference."""
    _require(cfg, Method.RETRAIN)
    rng = rng if rng is not None else make_rng(cfg.seed)

    def body() -> Classifier:
        model = init_classifier(arch, rng)
        return train_epochs(model, retain, cfg.epochs, cfg.eta, rng, cfg.batch_size)

    return _run_timed(cfg, body)


def neg_grad_plus(origin: Classifier, retain: Dataset, forget: Dataset, cfg: UnlearnConfig) -> UnlearnOutcome:
    """
    Each step descends w * L(retain batch) - (1 - w) * L(forget batch).

    Retain batches are shuffled exactly as fine_tune shuffles them under
    the same seed; forget batches come from the stream seeded [seed, 1].
    """
    _require(cfg, Method.NEG_GRAD_PLUS)

    def body() -> Classifier:
        return train_mixed_epochs(
            origin.clone(), retain, forget, cfg.epochs, cfg.eta,
            make_rng(cfg.seed), make_rng([cfg.seed, 1]),
            cfg.batch_size, cfg.retention_weight,
        )

    return _run_timed(cfg, body)


def relabel_forget(forget: Dataset, split: ClassSplit, rng: SeededRng) -> Dataset:
    """Replace every forget label by a uniform draw over the retained classes."""
    retained = split.retained_index
    if retained.size == 0:
        raise InvalidSplitError("no retained class to relabel into")
    return forget.with_labels(rng.choice(retained, size=len(forget)))


def random_label(
    origin: Classifier,
    split: ClassSplit,
    retain: Dataset,
    forget: Dataset,
    cfg: UnlearnConfig,
    rng: Optional[SeededRng] = None,
) -> UnlearnOutcome:
    """Train on retain plus the forget set relabeled into retained classes."""
    _require(cfg, Method.RANDOM_LABEL)
    if origin.class_count < 2:
        raise InvalidSplitError("random labels need at least two classes")
    rng = rng if rng is not None else make_rng(cfg.seed)

    def body() -> Classifier:
        mixed = retain.concat(relabel_forget(forget, split, rng))
        return train_epochs(origin.clone(), mixed, cfg.epochs, cfg.eta, rng, cfg.batch_size)

    return _run_timed(cfg, body)


# ============================================
# TWO-STAGE DESTROY / REPAIR
# ============================================

def _two_stage(origin: Classifier, retain: Dataset, forget: Dataset, cfg: UnlearnConfig, destroy_mode) -> Classifier:
    model = origin.frozen_copy()
    rng = make_rng(cfg.seed)
    epochs = ascend_until_forgotten(
        model, forget, cfg.destroy_epochs, cfg.destroy_eta, rng, cfg.batch_size, mode=destroy_mode,
    )
    logger.debug("%s: destroy stage finished after %d epoch(s)", cfg.method.label, epochs)
    return train_epochs(model, retain, cfg.repair_epochs, cfg.eta, rng, cfg.batch_size)


def ts_bgm(origin: Classifier, retain: Dataset, forget: Dataset, cfg: UnlearnConfig) -> UnlearnOutcome:
    """
    Destroy: gradient ascent on the forget set until none of it is classified
    correctly (at most destroy_epochs). Repair: descent on retain.
    """
    _require(cfg, Method.TS_BGM)
    return _run_timed(cfg, lambda: _two_stage(origin, retain, forget, cfg, STANDARD))


def ts_bgrm(
    origin: Classifier,
    split: ClassSplit,
    retain: Dataset,
    forget: Dataset,
    cfg: UnlearnConfig,
) -> UnlearnOutcome:
    """
    As ts_bgm, but the destroy stage reverses the forgotten-class bias
    gradients: the head weights ascend while the forgotten-class biases
    follow the descent direction.
    """
    _require(cfg, Method.TS_BGRM)
    return _run_timed(cfg, lambda: _two_stage(origin, retain, forget, cfg, BiasReversal(split)))


# ============================================
# LOWER-BOUND HINGE REGULARIZATION
# ============================================

def default_b_min(origin: Classifier, split: ClassSplit) -> float:
    """Smallest retained-class bias of the original model."""
    return float(np.min(origin.head.bias[split.retained_index]))


def lb_hr(origin: Classifier, split: ClassSplit, retain: Dataset, cfg: UnlearnConfig) -> UnlearnOutcome:
    """Head-only fine-tuning on retain with a hinge keeping b_V above b_min."""
    _require(cfg, Method.LB_HR)
    if cfg.b_min == AUTO:
        cfg = dataclasses.replace(cfg, b_min=default_b_min(origin, split))
    mode = HingeBound(float(cfg.b_min), float(cfg.lam), split)

    def body() -> Classifier:
        return train_epochs(
            origin.frozen_copy(), retain, cfg.epochs, cfg.eta,
            make_rng(cfg.seed), cfg.batch_size, mode=mode,
        )

    return _run_timed(cfg, body)


# ============================================
# DISPATCH
# ============================================

def run_method(
    origin: Classifier,
    split: ClassSplit,
    retain: Dataset,
    forget: Dataset,
    cfg: UnlearnConfig,
    calibration: Optional[Dataset] = None,
) -> UnlearnOutcome:
    """
    Run the method named by cfg.method.

    "auto" hyperparameters are resolved first (beta on `calibration`, held-out
    forgotten-class samples; b_min from the original model), outside the timed
    section. The returned config holds the resolved values.

    Raises:
        ConfigError: auto beta without a calibration set
    """
    method = cfg.method
    if method is Method.BIAS_SHIFT:
        beta = cfg.beta
        if beta == AUTO:
            if calibration is None:
                raise ConfigError("auto beta needs a calibration set")
            beta = calibrate_beta(origin, split, calibration)
        outcome = bias_shift(origin, split, beta)
        outcome.config = dataclasses.replace(cfg, beta=beta)
        return outcome
    if method is Method.LB_HR and cfg.b_min == AUTO:
        cfg = dataclasses.replace(cfg, b_min=default_b_min(origin, split))

    if method is Method.RETRAIN:
        return retrain(origin.architecture, retain, cfg)
    if method is Method.FINE_TUNE:
        return fine_tune(origin, retain, cfg)
    if method is Method.SHALLOW_FINE_TUNE:
        return shallow_fine_tune(origin, retain, cfg)
    if method is Method.NEG_GRAD_PLUS:
        return neg_grad_plus(origin, retain, forget, cfg)
    if method is Method.RANDOM_LABEL:
        return random_label(origin, split, retain, forget, cfg)
    if method is Method.TS_BGM:
        return ts_bgm(origin, retain, forget, cfg)
    if method is Method.TS_BGRM:
        return ts_bgrm(origin, split, retain, forget, cfg)
    if method is Method.LB_HR:
        return lb_hr(origin, split, retain, cfg)
    raise ConfigError(f"unknown method {method!r}")

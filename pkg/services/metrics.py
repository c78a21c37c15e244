"""
Evaluation metrics.

Conventional: retain/forget accuracy and RTR (unlearning time as a percentage
of retrain time).

Bias-oriented, computed from raw head biases (b_V forgotten, b_R retained):
    BSC = 100 / (1 + |mean(b_V) - mean(b_R)|)
    MBG = 100 * sigmoid(median(b_V) - min(b_R))
    MBS = 100 * sigmoid(min(b_V) - min(b_R))
The median of an even-sized set is the mean of its two middle values.

Leakage attack: guess the forgotten labels as the k smallest biases.
"""
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, FrozenSet, Optional, Tuple

import numpy as np

import config
from models.classifier import Classifier, predict_batch
from models.data import ClassSplit, Dataset
from utils.errors import InvalidInputError, ShapeError
from utils.numerics import as_vector, sigmoid

if TYPE_CHECKING:
    from services.unlearning import UnlearnOutcome


def accuracy(model: Classifier, data: Dataset) -> float:
    """Percentage of samples whose predicted label (lowest index on ties) is correct."""
    if len(data) == 0:
        raise InvalidInputError("cannot measure accuracy on an empty dataset")
    correct = predict_batch(model, data.features) == data.labels
    return 100.0 * float(np.count_nonzero(correct)) / len(data)


def rtr(t_unlearn: float, t_retrain: float) -> float:
    """Recovery Time Ratio: t_unlearn / t_retrain * 100."""
    for name, value in (("t_unlearn", t_unlearn), ("t_retrain", t_retrain)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidInputError(f"{name} must be a positive time, got {value}")
    return t_unlearn / t_retrain * 100.0


def _groups(bias, split: ClassSplit) -> Tuple[np.ndarray, np.ndarray]:
    b = as_vector(bias, "bias")
    if b.shape[0] != split.class_count:
        raise ShapeError(f"bias has {b.shape[0]} entries, split covers {split.class_count} classes")
    return b[split.forgotten_index], b[split.retained_index]


def mean_gap(bias, split: ClassSplit) -> float:
    forgotten, retained = _groups(bias, split)
    return float(np.mean(forgotten) - np.mean(retained))


def median_gap(bias, split: ClassSplit) -> float:
    forgotten, retained = _groups(bias, split)
    return float(np.median(forgotten) - np.min(retained))


def min_gap(bias, split: ClassSplit) -> float:
    forgotten, retained = _groups(bias, split)
    return float(np.min(forgotten) - np.min(retained))


def bsc(bias, split: ClassSplit) -> float:
    """Bias Stability Coefficient, in (0, 100]."""
    return 100.0 / (1.0 + abs(mean_gap(bias, split)))


def mbg(bias, split: ClassSplit) -> float:
    """Median Bias Gap, in (0, 100)."""
    return 100.0 * sigmoid(median_gap(bias, split))


def mbs(bias, split: ClassSplit) -> float:
    """Minimum Bias Suppression, in (0, 100); never above mbg."""
    return 100.0 * sigmoid(min_gap(bias, split))


def leakage_attack(bias, k: int) -> FrozenSet[int]:
    """Labels of the k smallest biases, lowest index first on ties."""
    b = as_vector(bias, "bias")
    if not 1 <= k < b.shape[0]:
        raise InvalidInputError(f"k must lie in 1..{b.shape[0] - 1}, got {k}")
    order = np.argsort(b, kind="stable")
    return frozenset(int(c) for c in order[:k])


@dataclass(frozen=True)
class BiasReport:
    bias_vector: np.ndarray
    split: ClassSplit
    bsc: float
    mbg: float
    mbs: float
    mean_gap: float
    median_gap: float
    min_gap: float
    leakage_prediction: FrozenSet[int]
    leakage_exact_match: bool

    @property
    def verdict(self) -> str:
        if self.mbs < config.SUSPECTED_MBS_THRESHOLD:
            return "suppressed: forgotten-class biases sit below the retained range"
        if self.leakage_exact_match:
            return "leaky: the smallest biases reveal the forgotten classes"
        return "no bias shortcut detected"

    def as_dict(self) -> dict:
        return {
            "bias": [float(b) for b in self.bias_vector],
            "forgotten": sorted(self.split.forgotten),
            "bsc": self.bsc,
            "mbg": self.mbg,
            "mbs": self.mbs,
            "mean_gap": self.mean_gap,
            "median_gap": self.median_gap,
            "min_gap": self.min_gap,
            "leakage_prediction": sorted(self.leakage_prediction),
            "leakage_exact_match": self.leakage_exact_match,
        }


def bias_report(bias, split: ClassSplit) -> BiasReport:
    b = as_vector(bias, "bias").copy()
    prediction = leakage_attack(b, len(split.forgotten))
    return BiasReport(
        bias_vector=b,
        split=split,
        bsc=bsc(b, split),
        mbg=mbg(b, split),
        mbs=mbs(b, split),
        mean_gap=mean_gap(b, split),
        median_gap=median_gap(b, split),
        min_gap=min_gap(b, split),
        leakage_prediction=prediction,
        leakage_exact_match=prediction == split.forgotten,
    )


@dataclass(frozen=True)
class EvalResult:
    retain_acc: float
    forget_acc: float
    bias: BiasReport
    elapsed: Optional[float] = None
    rtr: Optional[float] = None
    bias_dominated_suspected: bool = field(default=False)

    def as_dict(self) -> dict:
        return {
            "retain_acc": self.retain_acc,
            "forget_acc": self.forget_acc,
            "elapsed": self.elapsed,
            "rtr": self.rtr,
            "bias_dominated_suspected": self.bias_dominated_suspected,
            "bias": self.bias.as_dict(),
        }


def evaluate_model(
    model: Classifier,
    retain_test: Dataset,
    forget_test: Dataset,
    split: ClassSplit,
    elapsed: Optional[float] = None,
    t_retrain: Optional[float] = None,
) -> EvalResult:
    """
    Evaluate a model on the held-out splits.

    RTR is filled only when both times are known and positive.
    """
    retain_acc = accuracy(model, retain_test)
    forget_acc = accuracy(model, forget_test)
    report = bias_report(model.head.bias, split)
    ratio = None
    if elapsed and t_retrain and elapsed > 0 and t_retrain > 0:
        ratio = rtr(elapsed, t_retrain)
    return EvalResult(
        retain_acc=retain_acc,
        forget_acc=forget_acc,
        bias=report,
        elapsed=elapsed,
        rtr=ratio,
        bias_dominated_suspected=forget_acc == 0.0 and report.mbs < config.SUSPECTED_MBS_THRESHOLD,
    )


def evaluate(
    outcome: "UnlearnOutcome",
    retain_test: Dataset,
    forget_test: Dataset,
    split: ClassSplit,
    t_retrain: Optional[float] = None,
) -> EvalResult:
    """All metrics for one unlearning outcome."""
    return evaluate_model(
        outcome.model, retain_test, forget_test, split,
        elapsed=outcome.elapsed_seconds, t_retrain=t_retrain,
    )

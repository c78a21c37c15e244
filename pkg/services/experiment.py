"""
Experiment pipeline.

1. prepare_data        -> train/test sets split into retain and forget parts, plus
                          a calibration hold-out carved from the test set
2. train_origin_model  -> original model on the full training set
3. run_reference       -> Retrain reference (its time is the RTR denominator)
4. run_methods         -> every requested method on a fresh clone of the original model
5. assemble_report     -> evaluate on the held-out splits, one row per model
6. write_outputs       -> report.csv, report.json, bias_vectors.csv, checkpoints

run_experiment() chains the steps. audit_checkpoint(), dump_bias() and
sweep_beta() serve the standalone CLI commands.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from models.checkpoint import read_head, save_checkpoint
from models.classifier import Architecture, Classifier
from models.data import ClassSplit, Dataset
from services.datasets import hold_out, make_blobs_split, split_by_classes
from services.experiment_config import ExperimentConfig
from services.idx_loader import load_idx
from services.metrics import BiasReport, accuracy, bias_report, evaluate, evaluate_model
from services.reports import (
    STATUS_FAILED,
    ExperimentReport,
    ReportRow,
    bias_frame,
    dump_frame,
    now_iso,
    write_bias_vectors,
    write_report,
    write_sweep,
)
from services.training import train_origin
from services.unlearning import Method, UnlearnConfig, UnlearnOutcome, run_method, shift_biases
from utils.errors import ConfigError
from utils.numerics import make_rng
from utils.timer import timed

logger = logging.getLogger(__name__)

ORIGINAL_ROW = "Original"
RETRAIN_ROW = Method.RETRAIN.label

# A finished method run: its outcome, or the error that stopped it
MethodRun = Tuple[UnlearnConfig, Union[UnlearnOutcome, Exception]]


@dataclass(frozen=True)
class ExperimentData:
    train: Dataset
    test: Dataset
    split: ClassSplit
    retain_train: Dataset
    forget_train: Dataset
    retain_test: Dataset
    forget_test: Dataset
    # forgotten-class samples held out of `test`, used only to resolve auto beta
    calibration: Dataset


def _load_dataset(cfg: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    spec = cfg.dataset
    if spec.source == "blobs":
        return make_blobs_split(
            spec.class_count, spec.per_class, spec.dim, spec.separation,
            make_rng([cfg.seed, 0]), spread=spec.spread,
        )
    train = load_idx(spec.train_images, spec.train_labels)
    test = load_idx(spec.test_images, spec.test_labels)
    class_count = max(train.class_count, test.class_count)
    return (
        Dataset(train.features, train.labels, class_count),
        Dataset(test.features, test.labels, class_count),
    )


def prepare_data(cfg: ExperimentConfig) -> ExperimentData:
    """
    Step 1: build the datasets and the retain/forget partitions.

    A stratified calibration_fraction of the loaded test set becomes the
    calibration hold-out; `test` and the evaluation splits are the rest.
    """
    train, full_test = _load_dataset(cfg)
    if train.dim != full_test.dim:
        raise ConfigError(f"train inputs have {train.dim} features, test inputs {full_test.dim}")
    split = ClassSplit.from_forgotten(cfg.forgotten, train.class_count)
    held_out, test = hold_out(full_test, cfg.dataset.calibration_fraction, make_rng([cfg.seed, 3]))
    retain_train, forget_train = split_by_classes(train, split)
    retain_test, forget_test = split_by_classes(test, split)
    _, calibration = split_by_classes(held_out, split)
    parts = (
        ("retain test", retain_test), ("forget test", forget_test),
        ("forget train", forget_train), ("calibration", calibration),
    )
    for name, part in parts:
        if len(part) == 0:
            raise ConfigError(f"{name} set is empty for forgotten classes {sorted(split.forgotten)}")
    logger.info(
        "data: %d train / %d test / %d calibration samples, forgetting %s",
        len(train), len(test), len(calibration), sorted(split.forgotten),
    )
    return ExperimentData(train, test, split, retain_train, forget_train, retain_test, forget_test, calibration)


def architecture_for(cfg: ExperimentConfig, data: ExperimentData) -> Architecture:
    return Architecture.from_widths(
        data.train.dim, data.train.class_count, cfg.model.hidden_dim, cfg.model.feature_dim
    )


def train_origin_model(cfg: ExperimentConfig, data: ExperimentData) -> Tuple[Classifier, float]:
    """Step 2: train the original model. Returns (model, training seconds)."""
    training = cfg.training
    run = timed(train_origin)
    return run(
        architecture_for(cfg, data), data.train,
        training.epochs, training.eta, training.batch_size, make_rng([cfg.seed, 2]),
    )


def run_reference(cfg: ExperimentConfig, data: ExperimentData, origin: Classifier) -> UnlearnOutcome:
    """Step 3: Retrain reference, always sequential so its time is honest."""
    return run_method(origin, data.split, data.retain_train, data.forget_train, cfg.retrain_config(), data.calibration)


def _run_one(method_cfg: UnlearnConfig, data: ExperimentData, origin: Classifier) -> Union[UnlearnOutcome, Exception]:
    try:
        return run_method(origin, data.split, data.retain_train, data.forget_train, method_cfg, data.calibration)
    except Exception as e:
        logger.error("%s failed: %s", method_cfg.method.label, e)
        return e


def run_methods(
    cfg: ExperimentConfig,
    data: ExperimentData,
    origin: Classifier,
    methods: Optional[Sequence[UnlearnConfig]] = None,
) -> List[MethodRun]:
    """
    Step 4: run the requested methods (Retrain excluded, it is the reference).

    A failing method is returned as its exception; the others still run.
    In parallel mode every method works on its own clone of the original model.
    """
    methods = [m for m in (cfg.methods if methods is None else methods) if m.method is not Method.RETRAIN]
    if not cfg.parallel:
        return [(m, _run_one(m, data, origin)) for m in methods]

    results: Dict[int, Union[UnlearnOutcome, Exception]] = {}
    with ThreadPoolExecutor(max_workers=max(1, min(len(methods), os.cpu_count() or 1))) as executor:
        futures = {executor.submit(_run_one, m, data, origin.clone()): i for i, m in enumerate(methods)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return [(m, results[i]) for i, m in enumerate(methods)]


def assemble_report(
    cfg: ExperimentConfig,
    data: ExperimentData,
    origin: Classifier,
    reference: UnlearnOutcome,
    runs: Sequence[MethodRun],
) -> Tuple[ExperimentReport, Dict[str, Classifier]]:
    """
    Step 5: evaluate every model on the held-out splits.

    Returns:
        (report, models by row name) - failed rows have no model
    """
    t_retrain = reference.elapsed_seconds
    models = {ORIGINAL_ROW: origin, RETRAIN_ROW: reference.model}
    rows = [
        ReportRow(
            ORIGINAL_ROW, "original",
            result=evaluate_model(origin, data.retain_test, data.forget_test, data.split),
        ),
        ReportRow(
            RETRAIN_ROW, Method.RETRAIN.value,
            result=evaluate(reference, data.retain_test, data.forget_test, data.split, t_retrain),
            config=reference.config.snapshot(),
        ),
    ]
    for method_cfg, outcome in runs:
        name = method_cfg.method.label
        if isinstance(outcome, Exception):
            rows.append(ReportRow(
                name, method_cfg.method.value, status=STATUS_FAILED,
                config=method_cfg.snapshot(), error=f"{type(outcome).__name__}: {outcome}",
            ))
            continue
        if cfg.parallel:
            result = evaluate_model(outcome.model, data.retain_test, data.forget_test, data.split)
        else:
            result = evaluate(outcome, data.retain_test, data.forget_test, data.split, t_retrain)
        rows.append(ReportRow(name, method_cfg.method.value, result=result, config=outcome.config.snapshot()))
        models[name] = outcome.model

    report = ExperimentReport(rows=rows, config=cfg.snapshot(), parallel=cfg.parallel, t_retrain=t_retrain)
    return report, models


def _checkpoint_name(row: ReportRow) -> str:
    return f"{row.method}.ckpt"


def write_outputs(cfg: ExperimentConfig, report: ExperimentReport, models: Dict[str, Classifier]) -> dict:
    """Step 6: checkpoints (optional), report files and bias vectors."""
    paths = {}
    if cfg.save_checkpoints:
        checkpoint_dir = os.path.join(cfg.output_dir, config.CHECKPOINT_DIR)
        for row in report.rows:
            if row.name in models:
                row.checkpoint = save_checkpoint(models[row.name], os.path.join(checkpoint_dir, _checkpoint_name(row)))
        paths["checkpoints"] = checkpoint_dir
    report.finished_at = report.finished_at or now_iso()
    paths.update(write_report(report, cfg.output_dir))
    biases = {name: model.head.bias for name, model in models.items()}
    paths["bias_vectors"] = write_bias_vectors(bias_frame(report.rows, biases, cfg.forgotten), cfg.output_dir)
    return paths


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """
    Train the original model once, the Retrain reference once, then every requested
    method from a clone of it; evaluate all on the same held-out splits.
    """
    started_at = now_iso()
    data = prepare_data(cfg)
    origin, origin_seconds = train_origin_model(cfg, data)
    logger.info("origin trained in %.3f s", origin_seconds)
    reference = run_reference(cfg, data, origin)
    runs = run_methods(cfg, data, origin)
    report, models = assemble_report(cfg, data, origin, reference, runs)
    report.started_at = started_at
    report.finished_at = now_iso()
    if write:
        write_outputs(cfg, report, models)
    return report


# ============================================
# STANDALONE COMMANDS
# ============================================

def audit_checkpoint(path: str, forgotten: Sequence[int]) -> BiasReport:
    """
    Bias metrics and bottom-|V| leakage attack for a checkpoint's head.

    Raises:
        FileNotFoundError: missing checkpoint (message names the path)
        FormatError: malformed checkpoint (message carries the byte offset)
    """
    head = read_head(path)
    split = ClassSplit.from_forgotten(forgotten, head.bias.shape[0])
    return bias_report(head.bias, split)


def dump_bias(path: str, forgotten: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """Rows (class, bias, in_V) ordered by class index."""
    head = read_head(path)
    if forgotten is not None:
        ClassSplit.from_forgotten(forgotten, head.bias.shape[0])
    return dump_frame(head.bias, forgotten)


def sweep_beta(cfg: ExperimentConfig, origin: Optional[Classifier] = None, write: bool = True) -> pd.DataFrame:
    """
    Retain/forget accuracy of the original model with the forgotten biases shifted by
    each beta in the [sweep] range (negative beta raises them).
    """
    data = prepare_data(cfg)
    if origin is None:
        origin, _ = train_origin_model(cfg, data)
    betas = np.linspace(cfg.sweep.beta_start, cfg.sweep.beta_stop, cfg.sweep.beta_steps)
    records = []
    for beta in betas:
        shifted = shift_biases(origin, data.split, float(beta))
        records.append({
            "beta": float(beta),
            "retain_acc": accuracy(shifted, data.retain_test),
            "forget_acc": accuracy(shifted, data.forget_test),
        })
    frame = pd.DataFrame(records)
    if write:
        write_sweep(frame, cfg.output_dir)
    return frame

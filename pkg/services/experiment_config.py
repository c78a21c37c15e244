"""
Experiment configuration files.

INI grammar (keys are case-sensitive, '#' and ';' start comments):

    [experiment]   seed, output_dir, forgotten (comma list), parallel, save_checkpoints
    [dataset]      source = blobs | idx, calibration_fraction
                   blobs: class_count, per_class, dim, separation, spread
                   idx:   train_images, train_labels, test_images, test_labels
    [model]        hidden_dim, feature_dim
    [training]     epochs, eta, batch_size        (original model)
    [method.NAME]  one section per method, run in file order; keys among
                   eta, destroy_eta, epochs, destroy_epochs, repair_epochs, batch_size,
                   beta (number | auto), lambda, b_min (number | auto),
                   retention_weight, seed. Only the keys NAME uses are allowed.
                   [method.retrain] sets the Retrain reference.
    [sweep]        beta_start, beta_stop, beta_steps

Everything is validated here; nothing is trained before parsing succeeds.
"""
import configparser
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Tuple

import config
from models.data import ClassSplit
from services.unlearning import AUTO, METHOD_FIELDS, Method, UnlearnConfig
from utils.errors import ConfigError, InvalidSplitError

METHOD_PREFIX = "method."

SECTION_KEYS: Dict[str, Tuple[str, ...]] = {
    "experiment": ("seed", "output_dir", "forgotten", "parallel", "save_checkpoints"),
    "dataset": (
        "source", "calibration_fraction", "class_count", "per_class", "dim", "separation", "spread",
        "train_images", "train_labels", "test_images", "test_labels",
    ),
    "model": ("hidden_dim", "feature_dim"),
    "training": ("epochs", "eta", "batch_size"),
    "sweep": ("beta_start", "beta_stop", "beta_steps"),
}

BLOBS_KEYS = ("class_count", "per_class", "dim", "separation", "spread")
IDX_KEYS = ("train_images", "train_labels", "test_images", "test_labels")

# INI key -> UnlearnConfig field
METHOD_KEYS = {
    "eta": "eta",
    "destroy_eta": "destroy_eta",
    "epochs": "epochs",
    "destroy_epochs": "destroy_epochs",
    "repair_epochs": "repair_epochs",
    "batch_size": "batch_size",
    "beta": "beta",
    "lambda": "lam",
    "b_min": "b_min",
    "retention_weight": "retention_weight",
}


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "blobs"
    calibration_fraction: float = config.CALIBRATION_FRACTION
    class_count: int = config.BLOBS_CLASS_COUNT
    per_class: int = config.BLOBS_PER_CLASS
    dim: int = config.BLOBS_DIM
    separation: float = config.BLOBS_SEPARATION
    spread: float = config.BLOBS_SPREAD
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None


@dataclass(frozen=True)
class ModelSpec:
    hidden_dim: int = config.HIDDEN_DIM
    feature_dim: int = config.FEATURE_DIM


@dataclass(frozen=True)
class TrainingSpec:
    epochs: int = config.TRAIN_EPOCHS
    eta: float = config.TRAIN_ETA
    batch_size: int = config.TRAIN_BATCH_SIZE


@dataclass(frozen=True)
class SweepSpec:
    beta_start: float = config.SWEEP_BETA_START
    beta_stop: float = config.SWEEP_BETA_STOP
    beta_steps: int = config.SWEEP_BETA_STEPS


@dataclass(frozen=True)
class ExperimentConfig:
    forgotten: Tuple[int, ...]
    seed: int = config.DEFAULT_SEED
    output_dir: str = config.OUTPUT_DIR
    parallel: bool = False
    save_checkpoints: bool = True
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    methods: Tuple[UnlearnConfig, ...] = ()
    sweep: SweepSpec = field(default_factory=SweepSpec)
    source: str = "<defaults>"

    def retrain_config(self) -> UnlearnConfig:
        """Retrain reference: the [method.retrain] section if given, else the Retrain defaults."""
        for cfg in self.methods:
            if cfg.method is Method.RETRAIN:
                return cfg
        return UnlearnConfig.for_method(Method.RETRAIN, seed=self.seed)

    def snapshot(self) -> dict:
        return {
            "source": self.source,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "forgotten": list(self.forgotten),
            "parallel": self.parallel,
            "save_checkpoints": self.save_checkpoints,
            "dataset": asdict(self.dataset),
            "model": asdict(self.model),
            "training": asdict(self.training),
            "methods": [cfg.snapshot() for cfg in self.methods],
            "sweep": asdict(self.sweep),
        }


def _convert(section: str, key: str, raw: str, kind: Callable):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}") from None


def _bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _float_or_auto(raw: str):
    return AUTO if raw.strip().lower() == AUTO else float(raw)


def _int_list(raw: str) -> Tuple[int, ...]:
    items = [item.strip() for item in raw.split(",") if item.strip()]
    return tuple(int(item) for item in items)


_int_list.__name__ = "comma-separated integers"
_float_or_auto.__name__ = "number or 'auto'"
_bool.__name__ = "boolean"

KEY_TYPES: Dict[str, Callable] = {
    "seed": int, "output_dir": str, "forgotten": _int_list, "parallel": _bool, "save_checkpoints": _bool,
    "source": str, "calibration_fraction": float,
    "class_count": int, "per_class": int, "dim": int, "separation": float, "spread": float,
    "train_images": str, "train_labels": str, "test_images": str, "test_labels": str,
    "hidden_dim": int, "feature_dim": int,
    "epochs": int, "eta": float, "batch_size": int,
    "beta_start": float, "beta_stop": float, "beta_steps": int,
    "destroy_eta": float, "destroy_epochs": int, "repair_epochs": int, "beta": _float_or_auto, "lambda": float,
    "b_min": _float_or_auto, "retention_weight": float,
}


def _section_values(parser: configparser.ConfigParser, section: str, allowed) -> dict:
    if not parser.has_section(section):
        return {}
    values = {}
    for key, raw in parser.items(section):
        if key not in allowed:
            raise ConfigError(f"[{section}] unknown key '{key}'")
        values[key] = _convert(section, key, raw, KEY_TYPES[key])
    return values


def _parse_method(parser, section: str, default_seed: int) -> UnlearnConfig:
    method = Method.parse(section[len(METHOD_PREFIX):])
    allowed = {key for key, name in METHOD_KEYS.items() if name in METHOD_FIELDS[method]} | {"seed"}
    for key, _ in parser.items(section):
        if key not in allowed and key in METHOD_KEYS:
            raise ConfigError(f"[{section}] '{key}' does not apply to {method.value}")
    values = _section_values(parser, section, allowed)
    seed = values.pop("seed", default_seed)
    overrides = {METHOD_KEYS[key]: value for key, value in values.items()}
    return UnlearnConfig.for_method(method, seed=seed, **overrides)


def _parse_dataset(values: dict) -> DatasetSpec:
    source = values.get("source", "blobs")
    if source == "blobs":
        stray = [k for k in IDX_KEYS if k in values]
        if stray:
            raise ConfigError(f"[dataset] {', '.join(stray)} only apply to source = idx")
    elif source == "idx":
        missing = [k for k in IDX_KEYS if k not in values]
        if missing:
            raise ConfigError(f"[dataset] source = idx needs {', '.join(missing)}")
        stray = [k for k in BLOBS_KEYS if k in values]
        if stray:
            raise ConfigError(f"[dataset] {', '.join(stray)} only apply to source = blobs")
    else:
        raise ConfigError(f"[dataset] source must be 'blobs' or 'idx', got {source!r}")
    spec = DatasetSpec(**values)
    if not 0.0 < spec.calibration_fraction < 1.0:
        raise ConfigError("[dataset] calibration_fraction must lie in (0, 1)")
    if source == "blobs":
        for key in ("class_count", "per_class", "dim"):
            if getattr(spec, key) < 1:
                raise ConfigError(f"[dataset] {key} must be positive")
        if spec.separation <= 0 or spec.spread <= 0:
            raise ConfigError("[dataset] separation and spread must be > 0")
        if spec.dim < spec.class_count:
            raise ConfigError(f"[dataset] dim {spec.dim} is too small for {spec.class_count} class centers")
    return spec


def parse_experiment_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse an experiment config from INI text.

    Raises:
        ConfigError: unknown section/key, malformed value, inapplicable
                     method key, or invalid forgotten set
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__defaults__",
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e

    for section in parser.sections():
        if section not in SECTION_KEYS and not section.startswith(METHOD_PREFIX):
            raise ConfigError(f"unknown section [{section}]")

    experiment = _section_values(parser, "experiment", SECTION_KEYS["experiment"])
    if "forgotten" not in experiment or not experiment["forgotten"]:
        raise ConfigError("[experiment] forgotten must list at least one class")
    seed = experiment.get("seed", config.DEFAULT_SEED)
    if seed < 0:
        raise ConfigError("[experiment] seed must be >= 0")

    dataset = _parse_dataset(_section_values(parser, "dataset", SECTION_KEYS["dataset"]))
    model = ModelSpec(**_section_values(parser, "model", SECTION_KEYS["model"]))
    if model.hidden_dim < 0 or model.feature_dim < 0 or (model.feature_dim == 0 and model.hidden_dim):
        raise ConfigError("[model] widths must be >= 0, and feature_dim 0 requires hidden_dim 0")
    training = TrainingSpec(**_section_values(parser, "training", SECTION_KEYS["training"]))
    if training.epochs < 1 or training.eta <= 0 or training.batch_size < 1:
        raise ConfigError("[training] needs epochs >= 1, eta > 0, batch_size >= 1")
    sweep = SweepSpec(**_section_values(parser, "sweep", SECTION_KEYS["sweep"]))
    if sweep.beta_steps < 2 or sweep.beta_stop <= sweep.beta_start:
        raise ConfigError("[sweep] needs beta_steps >= 2 and beta_stop > beta_start")

    methods = tuple(
        _parse_method(parser, section, seed)
        for section in parser.sections() if section.startswith(METHOD_PREFIX)
    )

    forgotten = tuple(sorted(set(experiment["forgotten"])))
    if dataset.source == "blobs":
        try:
            ClassSplit.from_forgotten(forgotten, dataset.class_count)
        except InvalidSplitError as e:
            raise ConfigError(f"[experiment] forgotten: {e}") from e

    return ExperimentConfig(
        forgotten=forgotten,
        seed=seed,
        output_dir=experiment.get("output_dir", config.OUTPUT_DIR),
        parallel=experiment.get("parallel", False),
        save_checkpoints=experiment.get("save_checkpoints", True),
        dataset=dataset,
        model=model,
        training=training,
        methods=methods,
        sweep=sweep,
        source=source,
    )


def load_experiment_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return parse_experiment_config(f.read(), source=path)

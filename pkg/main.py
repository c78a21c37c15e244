"""
Head-bias unlearning lab - command line entry point

Commands:
    run <config>                          full experiment (steps below)
    audit <checkpoint> --forgotten 3,4,5  bias metrics + leakage attack on a checkpoint
    dump-bias <checkpoint>                per-class bias table as CSV
    sweep-beta <config>                   original-model accuracy vs forgotten-bias shift

Experiment pipeline:
1. Data      -> train/test sets, retain/forget partitions
2. Origin    -> train the original model on the full training set
3. Retrain   -> reference model on the retain set (retrain time)
4. Unlearn   -> every requested method from a clone of the original model
5. Evaluate  -> accuracy, RTR, BSC, MBG, MBS, leakage attack
6. Export    -> report.csv, report.json, bias_vectors.csv, checkpoints
"""
import argparse
import dataclasses
import logging
import sys
from datetime import datetime
from typing import List, Optional

import pandas as pd

import config
from services.experiment import (
    assemble_report,
    audit_checkpoint,
    dump_bias,
    prepare_data,
    run_methods,
    run_reference,
    sweep_beta,
    train_origin_model,
    write_outputs,
)
from services.experiment_config import ExperimentConfig, load_experiment_config
from services.metrics import accuracy
from services.reports import report_frame
from utils.errors import HeadBiasError


def banner(title: str):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


def run_step_1_data(cfg: ExperimentConfig):
    """Step 1: build datasets and splits"""
    banner(f"STEP 1: Data ({cfg.dataset.source})")

    data = prepare_data(cfg)
    print(f"\n✓ {len(data.train)} train / {len(data.test)} test samples, {data.train.class_count} classes")
    print(f"✓ {len(data.calibration)} forgotten-class test samples held out for auto-beta calibration")
    print(f"✓ Forgetting {sorted(data.split.forgotten)}: "
          f"{len(data.retain_train)} retain / {len(data.forget_train)} forget training samples")

    return data


def run_step_2_origin(cfg: ExperimentConfig, data):
    """Step 2: train the original model"""
    banner("STEP 2: Original model")

    origin, seconds = train_origin_model(cfg, data)
    print(f"\n✓ Trained in {seconds:.2f}s - train accuracy {accuracy(origin, data.train):.2f}%")

    return origin


def run_step_3_retrain(cfg: ExperimentConfig, data, origin):
    """Step 3: Retrain reference"""
    banner("STEP 3: Retrain reference")

    reference = run_reference(cfg, data, origin)
    print(f"\n✓ Retrain time = {reference.elapsed_seconds:.6f}s")

    return reference


def run_step_4_unlearning(cfg: ExperimentConfig, data, origin):
    """Step 4: unlearning methods"""
    mode = "parallel, time columns blanked" if cfg.parallel else "sequential"
    banner(f"STEP 4: Unlearning methods ({mode})")

    runs = run_methods(cfg, data, origin)
    if not runs:
        print("⚠ No method requested - only the Original and Retrain rows will be reported")
    for method_cfg, outcome in runs:
        if isinstance(outcome, Exception):
            print(f"❌ {method_cfg.method.label}: {outcome}")
        else:
            print(f"✓ {method_cfg.method.label}: {outcome.elapsed_seconds:.6f}s")

    return runs


def run_step_5_evaluate(cfg: ExperimentConfig, data, origin, reference, runs):
    """Step 5: evaluation on the held-out splits"""
    banner("STEP 5: Evaluation")

    report, models = assemble_report(cfg, data, origin, reference, runs)
    for row in report.rows:
        if row.ok and row.result.bias_dominated_suspected:
            print(f"⚠ {row.name}: bias-dominated shortcut suspected (MBS {row.result.bias.mbs:.3g}%)")
    print(f"\n✓ {len(report.rows)} rows evaluated")

    return report, models


def run_step_6_export(cfg: ExperimentConfig, report, models) -> dict:
    """Step 6: write reports and checkpoints"""
    banner("STEP 6: Export")

    paths = write_outputs(cfg, report, models)
    for kind, path in paths.items():
        print(f"✓ {kind}: {path}")

    return paths


def run_full_pipeline(cfg: ExperimentConfig):
    start_time = datetime.now()
    print("\n" + "#" * 60)
    print(f"# {config.APP_NAME.upper()} {config.APP_VERSION}")
    print(f"# Config: {cfg.source} (seed {cfg.seed})")
    print(f"# Started: {start_time.strftime('%Y-%m-%d %H:%M:%S')}")
    print("#" * 60)

    data = run_step_1_data(cfg)
    origin = run_step_2_origin(cfg, data)
    reference = run_step_3_retrain(cfg, data, origin)
    runs = run_step_4_unlearning(cfg, data, origin)
    report, models = run_step_5_evaluate(cfg, data, origin, reference, runs)
    run_step_6_export(cfg, report, models)

    print("\n" + "#" * 60)
    print("# SUMMARY")
    print("#" * 60)
    with pd.option_context("display.width", 160, "display.max_columns", None):
        print(report_frame(report).drop(columns=["error"]).to_string(index=False))
    print(f"Duration: {datetime.now() - start_time}")
    print("#" * 60)

    return report


def _forgotten(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of class indices, got {text!r}")


def cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    overrides = {}
    if args.parallel:
        overrides["parallel"] = True
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    report = run_full_pipeline(cfg)
    return 0 if all(row.ok for row in report.rows) else 1


def cmd_audit(args) -> int:
    banner(f"AUDIT: {args.checkpoint}")
    report = audit_checkpoint(args.checkpoint, args.forgotten)
    print(f"Forgotten classes:  {sorted(report.split.forgotten)}")
    print(f"BSC:  {report.bsc:.6g}%   (mean gap {report.mean_gap:+.4f})")
    print(f"MBG:  {report.mbg:.6g}%   (median gap {report.median_gap:+.4f})")
    print(f"MBS:  {report.mbs:.6g}%   (min gap {report.min_gap:+.4f})")
    print(f"Leakage attack guess: {sorted(report.leakage_prediction)} "
          f"({'exact match' if report.leakage_exact_match else 'no exact match'})")
    marker = "✓" if report.verdict.startswith("no ") else "⚠"
    print(f"\n{marker} Verdict: {report.verdict}")
    return 0


def cmd_dump_bias(args) -> int:
    frame = dump_bias(args.checkpoint, args.forgotten)
    if args.output:
        frame.to_csv(args.output, index=False)
        print(f"✓ {len(frame)} rows written to {args.output}")
    else:
        sys.stdout.write(frame.to_csv(index=False))
    return 0


def cmd_sweep_beta(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    banner(f"BETA SWEEP: {cfg.sweep.beta_start:g} .. {cfg.sweep.beta_stop:g} ({cfg.sweep.beta_steps} steps)")
    frame = sweep_beta(cfg)
    print(frame.to_string(index=False))
    print(f"\n✓ {config.SWEEP_CSV} written to {cfg.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Classification-head bias unlearning lab")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="Logging level (default from HEADBIAS_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a full experiment")
    run.add_argument("config", nargs="?", default=config.DEFAULT_CONFIG, help="Experiment INI file")
    run.add_argument("--parallel", action="store_true", help="Run methods concurrently (time/RTR columns blanked)")
    run.add_argument("--output-dir", help="Override [experiment] output_dir")
    run.set_defaults(handler=cmd_run)

    audit = commands.add_parser("audit", help="Audit a checkpoint's head biases")
    audit.add_argument("checkpoint")
    audit.add_argument("--forgotten", type=_forgotten, required=True, help="Forgotten classes, e.g. 3,4,5")
    audit.set_defaults(handler=cmd_audit)

    dump = commands.add_parser("dump-bias", help="Print the head-bias table of a checkpoint")
    dump.add_argument("checkpoint")
    dump.add_argument("--forgotten", type=_forgotten, help="Forgotten classes for the in_V column")
    dump.add_argument("--output", help="CSV path (stdout when omitted)")
    dump.set_defaults(handler=cmd_dump_bias)

    sweep = commands.add_parser("sweep-beta", help="Original-model accuracy as the forgotten biases shift")
    sweep.add_argument("config", nargs="?", default=config.DEFAULT_CONFIG, help="Experiment INI file")
    sweep.add_argument("--output-dir", help="Override [experiment] output_dir")
    sweep.set_defaults(handler=cmd_sweep_beta)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (HeadBiasError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

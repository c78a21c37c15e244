"""
Pipeline runner that drives the experiment steps from Streamlit.
"""
import dataclasses
import io
import logging
import os
import sys
from datetime import datetime
from typing import Optional, Sequence

import streamlit as st

# Add project root to path for imports
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from main import (
    run_step_1_data,
    run_step_2_origin,
    run_step_3_retrain,
    run_step_4_unlearning,
    run_step_5_evaluate,
    run_step_6_export,
)
from services.experiment import audit_checkpoint
from services.experiment_config import ExperimentConfig, load_experiment_config
from services.metrics import BiasReport
from services.unlearning import Method

from .state_manager import (
    STEP_COUNT,
    StepStatus,
    add_step_log,
    update_step_state,
)


class StepLogHandler(logging.Handler):
    """Forwards log records to a step's log list."""

    def __init__(self, step: int, state=None):
        super().__init__(level=logging.INFO)
        self.step = step
        self.state = state
        self.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))

    def emit(self, record: logging.LogRecord):
        add_step_log(self.step, self.format(record), self.state)


class OutputCapture:
    """Captures print output and log records of one step into session state logs."""

    def __init__(self, step: int, state=None):
        self.step = step
        self.state = state
        self.buffer = io.StringIO()
        self.handler = StepLogHandler(step, state)
        self._original_stdout = None

    def write(self, text):
        if text.strip():
            add_step_log(self.step, text.strip(), self.state)
        self.buffer.write(text)

    def flush(self):
        self.buffer.flush()

    def __enter__(self):
        self._original_stdout = sys.stdout
        sys.stdout = self
        logging.getLogger().addHandler(self.handler)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        sys.stdout = self._original_stdout
        logging.getLogger().removeHandler(self.handler)
        return False


def check_stop_requested() -> bool:
    """Check if stop was requested."""
    return st.session_state.get("stop_requested", False)


def run_step_with_capture(step: int, func, *args, **kwargs):
    """Run a step function with output capture and state management."""
    if check_stop_requested():
        update_step_state(step, status=StepStatus.FAILED, error_message="Stopped by the user")
        return None

    st.session_state.current_step = step
    update_step_state(
        step,
        status=StepStatus.RUNNING,
        started_at=datetime.now().isoformat(),
        error_message=None,
    )

    try:
        with OutputCapture(step):
            result = func(*args, **kwargs)

        update_step_state(step, status=StepStatus.COMPLETED, completed_at=datetime.now().isoformat())
        return result

    except Exception as e:
        update_step_state(
            step,
            status=StepStatus.FAILED,
            error_message=str(e),
            completed_at=datetime.now().isoformat(),
        )
        add_step_log(step, f"ERROR: {e}")
        raise


def load_config(path: str, methods: Optional[Sequence[str]] = None, parallel: bool = False) -> ExperimentConfig:
    """
    Parse the config file and keep only the selected methods (all when None).
    A [method.retrain] section always stays: it defines the Retrain reference.
    """
    cfg = load_experiment_config(path)
    selected = cfg.methods if methods is None else tuple(
        m for m in cfg.methods if m.method is Method.RETRAIN or m.method.value in methods
    )
    return dataclasses.replace(cfg, methods=selected, parallel=parallel or cfg.parallel)


def _require(key: str, step: int):
    value = st.session_state.get(key)
    if value is None:
        raise ValueError(f"Missing {key.replace('_', ' ')}. Run step {step} first.")
    return value


def execute_step_1():
    """Execute Step 1: datasets and splits."""
    cfg = load_config(
        st.session_state.config_path,
        st.session_state.get("selected_methods"),
        st.session_state.get("parallel", False),
    )
    st.session_state.experiment_config = cfg
    data = run_step_with_capture(1, run_step_1_data, cfg)
    if data is not None:
        st.session_state.data = data
        update_step_state(1, result_count=len(data.train) + len(data.test))
    return data


def execute_step_2():
    """Execute Step 2: train the original model."""
    cfg = _require("experiment_config", 1)
    data = _require("data", 1)
    origin = run_step_with_capture(2, run_step_2_origin, cfg, data)
    if origin is not None:
        st.session_state.origin = origin
        update_step_state(2, result_count=1)
    return origin


def execute_step_3():
    """Execute Step 3: Retrain reference."""
    reference = run_step_with_capture(
        3, run_step_3_retrain,
        _require("experiment_config", 1), _require("data", 1), _require("origin", 2),
    )
    if reference is not None:
        st.session_state.reference = reference
        update_step_state(3, result_count=1)
    return reference


def execute_step_4():
    """Execute Step 4: unlearning methods."""
    runs = run_step_with_capture(
        4, run_step_4_unlearning,
        _require("experiment_config", 1), _require("data", 1), _require("origin", 2),
    )
    if runs is not None:
        st.session_state.runs = runs
        update_step_state(4, result_count=sum(1 for _, outcome in runs if not isinstance(outcome, Exception)))
    return runs


def execute_step_5():
    """Execute Step 5: evaluation."""
    result = run_step_with_capture(
        5, run_step_5_evaluate,
        _require("experiment_config", 1), _require("data", 1), _require("origin", 2),
        _require("reference", 3), _require("runs", 4),
    )
    if result is not None:
        report, models = result
        st.session_state.report = report
        st.session_state.models = models
        update_step_state(5, result_count=len(report.rows))
    return result


def execute_step_6():
    """Execute Step 6: reports and checkpoints."""
    paths = run_step_with_capture(
        6, run_step_6_export,
        _require("experiment_config", 1), _require("report", 5), _require("models", 5),
    )
    if paths is not None:
        st.session_state.report_paths = paths
        update_step_state(6, result_count=len(paths))
    return paths


STEP_FUNCTIONS = {
    1: execute_step_1,
    2: execute_step_2,
    3: execute_step_3,
    4: execute_step_4,
    5: execute_step_5,
    6: execute_step_6,
}


def run_full_pipeline() -> bool:
    """
    Run every step in order.

    Returns:
        bool: True if completed successfully, False if stopped/failed
    """
    st.session_state.is_running = True
    st.session_state.pipeline_started_at = datetime.now().isoformat()

    try:
        for step in range(1, STEP_COUNT + 1):
            if STEP_FUNCTIONS[step]() is None or check_stop_requested():
                return False

        st.session_state.pipeline_completed_at = datetime.now().isoformat()
        return True

    except Exception:
        return False

    finally:
        st.session_state.is_running = False


def run_single_step(step: int) -> bool:
    """
    Run a single pipeline step.

    Returns:
        bool: True if successful, False if failed
    """
    st.session_state.is_running = True

    try:
        if step not in STEP_FUNCTIONS:
            raise ValueError(f"Invalid step: {step}")
        return STEP_FUNCTIONS[step]() is not None

    except Exception as e:
        st.error(f"Step {step} error: {e}")
        return False

    finally:
        st.session_state.is_running = False


def run_audit(checkpoint_path: str, forgotten: Sequence[int]) -> Optional[BiasReport]:
    """Audit a checkpoint file; errors are shown in the page."""
    try:
        report = audit_checkpoint(checkpoint_path, forgotten)
        st.session_state.audit_report = report
        return report
    except Exception as e:
        st.error(f"Audit failed: {e}")
        return None

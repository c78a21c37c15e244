"""
Session state management for the experiment dashboard.

Every function takes an optional `state` mapping and falls back to
st.session_state, so the bookkeeping works on a plain dict as well.
"""
from datetime import datetime
from enum import Enum
from typing import Dict, MutableMapping, Optional

import streamlit as st

import config


class StepStatus(Enum):
    """Status of a pipeline step."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


STEP_NAMES = {
    1: ("Data", "Datasets and retain/forget splits"),
    2: ("Origin", "Train the original model"),
    3: ("Retrain", "Reference model and retrain time"),
    4: ("Unlearning", "Selected methods"),
    5: ("Evaluation", "Accuracy, RTR, BSC, MBG, MBS"),
    6: ("Export", "Reports and checkpoints"),
}
STEP_COUNT = len(STEP_NAMES)


STATUS_ICONS = {
    StepStatus.PENDING: "⏳",
    StepStatus.RUNNING: "🔄",
    StepStatus.COMPLETED: "✅",
    StepStatus.FAILED: "❌",
}


STATUS_COLORS = {
    StepStatus.PENDING: "#6c757d",
    StepStatus.RUNNING: "#0d6efd",
    StepStatus.COMPLETED: "#198754",
    StepStatus.FAILED: "#dc3545",
}

# Results produced by the steps, cleared on reset
RESULT_KEYS = ("experiment_config", "data", "origin", "reference", "runs", "report", "models", "report_paths")


def _state(state: Optional[MutableMapping]) -> MutableMapping:
    return st.session_state if state is None else state


def create_initial_steps() -> Dict[int, dict]:
    """Create initial step states as dicts (for JSON serialization)."""
    return {
        i: {
            "status": StepStatus.PENDING.value,
            "started_at": None,
            "completed_at": None,
            "result_count": 0,
            "error_message": None,
            "logs": [],
        }
        for i in STEP_NAMES
    }


def initialize_session_state(state: Optional[MutableMapping] = None):
    """Initialize all session state variables."""
    state = _state(state)
    defaults = {
        # Configuration
        "config_path": config.DEFAULT_CONFIG,
        "parallel": False,
        "selected_methods": None,

        # Pipeline state
        "is_running": False,
        "current_step": 0,
        "stop_requested": False,
        "pipeline_started_at": None,
        "pipeline_completed_at": None,
        "steps": create_initial_steps(),

        # Audit tab
        "audit_report": None,
    }
    defaults.update({key: None for key in RESULT_KEYS})

    for key, default_value in defaults.items():
        if key not in state:
            state[key] = default_value


def reset_pipeline_state(state: Optional[MutableMapping] = None):
    """Reset pipeline to initial state for a new run."""
    state = _state(state)
    state["is_running"] = False
    state["current_step"] = 0
    state["stop_requested"] = False
    state["pipeline_started_at"] = None
    state["pipeline_completed_at"] = None
    state["steps"] = create_initial_steps()
    for key in RESULT_KEYS:
        state[key] = None


def get_step_state(step: int, state: Optional[MutableMapping] = None) -> dict:
    """Get state for a specific step."""
    return _state(state)["steps"].get(step, {})


def update_step_state(step: int, state: Optional[MutableMapping] = None, **kwargs):
    """Update state for a specific step."""
    steps = _state(state)["steps"]
    if step not in steps:
        steps[step] = create_initial_steps()[step]

    for key, value in kwargs.items():
        if key == "status" and isinstance(value, StepStatus):
            steps[step][key] = value.value
        else:
            steps[step][key] = value


def add_step_log(step: int, message: str, state: Optional[MutableMapping] = None):
    """Add a log message to a step."""
    steps = _state(state)["steps"]
    timestamp = datetime.now().strftime("%H:%M:%S")
    if step in steps:
        steps[step]["logs"].append(f"[{timestamp}] {message}")


def get_completed_steps_count(state: Optional[MutableMapping] = None) -> int:
    """Get count of completed steps."""
    return sum(
        1 for step_data in _state(state)["steps"].values()
        if step_data.get("status") == StepStatus.COMPLETED.value
    )


def get_step_status(step: int, state: Optional[MutableMapping] = None) -> StepStatus:
    """Get the status enum for a step."""
    step_data = get_step_state(step, state)
    return StepStatus(step_data.get("status", StepStatus.PENDING.value))

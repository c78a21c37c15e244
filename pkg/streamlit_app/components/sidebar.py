"""
Sidebar component with configuration and controls.
"""
import os
import sys

import streamlit as st

# Add project root to path for imports
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from services.experiment_config import load_experiment_config
from services.unlearning import Method
from streamlit_app.core.state_manager import STEP_NAMES
from utils.errors import HeadBiasError


def render_sidebar():
    """Render the sidebar with configuration options and controls."""

    st.sidebar.title("Configuration")

    # === SECTION 1: Experiment ===
    st.sidebar.header("Experiment")

    config_path = st.sidebar.text_input(
        "Config file",
        value=st.session_state.get("config_path"),
        help="INI experiment config (see configs/default.ini)",
    )
    st.session_state.config_path = config_path

    render_method_picker(config_path)

    parallel = st.sidebar.checkbox(
        "Run methods in parallel",
        value=st.session_state.get("parallel", False),
        help="Faster, but the time and RTR columns are left empty",
    )
    st.session_state.parallel = parallel

    st.sidebar.divider()

    # === SECTION 2: Pipeline Control ===
    st.sidebar.header("Pipeline")

    is_running = st.session_state.get("is_running", False)

    col1, col2 = st.sidebar.columns(2)

    with col1:
        run_clicked = st.button(
            "Run experiment",
            type="primary",
            use_container_width=True,
            disabled=is_running,
            key="btn_run_pipeline",
        )

    with col2:
        stop_clicked = st.button(
            "Stop",
            type="secondary",
            use_container_width=True,
            disabled=not is_running,
            key="btn_stop",
        )

    if stop_clicked:
        st.session_state.stop_requested = True

    st.sidebar.divider()

    # === SECTION 3: Individual Step Execution ===
    st.sidebar.header("Run one step")

    selected_step = st.sidebar.selectbox(
        "Step",
        options=list(STEP_NAMES.keys()),
        format_func=lambda x: f"Step {x}: {STEP_NAMES[x][0]}",
        key="selected_step",
    )

    _, step_desc = STEP_NAMES[selected_step]
    st.sidebar.caption(step_desc)
    if selected_step > 1:
        st.sidebar.caption(f"*Needs steps 1-{selected_step - 1}*")

    run_step_clicked = st.sidebar.button(
        f"Run step {selected_step}",
        use_container_width=True,
        disabled=is_running,
        key="btn_run_step",
    )

    return {
        "run_pipeline": run_clicked,
        "stop": stop_clicked,
        "run_step": run_step_clicked,
        "selected_step": selected_step,
    }


def render_method_picker(config_path: str):
    """Multiselect over the methods declared in the config file."""
    try:
        cfg = load_experiment_config(config_path)
    except HeadBiasError as e:
        st.sidebar.error(f"Config error: {e}")
        st.session_state.selected_methods = None
        return

    methods = [m for m in cfg.methods if m.method is not Method.RETRAIN]
    available = [m.method.value for m in methods]
    labels = {m.method.value: m.method.label for m in methods}
    selected = st.sidebar.multiselect(
        "Methods",
        options=available,
        default=available,
        format_func=lambda name: labels[name],
        help="Original and Retrain rows are always reported",
    )
    st.session_state.selected_methods = selected

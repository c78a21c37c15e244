"""
Head-bias unlearning lab - Streamlit UI
"""
import logging
import os
import sys
import tempfile

# Add project root to path for imports (works locally and on Streamlit Cloud)
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import streamlit as st

# Page configuration - MUST be first Streamlit command
st.set_page_config(
    page_title="Head-bias unlearning lab",
    page_icon="🧪",
    layout="wide",
    initial_sidebar_state="expanded",
)

import config
from streamlit_app.components.data_tables import render_audit_report, render_bias_table, render_results_table
from streamlit_app.components.download_buttons import render_download_section
from streamlit_app.components.progress_tracker import render_progress_tracker, render_step_logs
from streamlit_app.components.sidebar import render_sidebar
from streamlit_app.core.pipeline_runner import run_audit, run_full_pipeline, run_single_step
from streamlit_app.core.state_manager import initialize_session_state, reset_pipeline_state

logging.basicConfig(level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO))

initialize_session_state()


def handle_run_pipeline():
    """Handle running the full experiment."""
    reset_pipeline_state()

    if run_full_pipeline():
        st.success("Experiment finished.")
    elif st.session_state.get("stop_requested"):
        st.warning("Experiment stopped by the user.")
    else:
        st.error("The experiment failed. See the logs tab for details.")


def handle_run_step(step: int):
    """Handle running a single step."""
    if run_single_step(step):
        st.success(f"Step {step} finished.")
    else:
        st.error(f"Step {step} failed. See the logs tab.")


def handle_audit(uploaded_file, forgotten_text: str):
    """Audit an uploaded checkpoint."""
    try:
        forgotten = [int(item) for item in forgotten_text.split(",") if item.strip()]
    except ValueError:
        st.error("Forgotten classes must be a comma-separated list of integers")
        return

    with tempfile.NamedTemporaryFile(delete=False, suffix=".ckpt") as tmp:
        tmp.write(uploaded_file.getvalue())
        tmp_path = tmp.name
    try:
        run_audit(tmp_path, forgotten)
    finally:
        os.unlink(tmp_path)


# ============================================
# MAIN APP
# ============================================

st.title("🧪 Head-bias unlearning lab")
st.markdown("Class unlearning methods and the classification-head bias shortcut")

actions = render_sidebar()

if actions["run_pipeline"]:
    handle_run_pipeline()
    st.rerun()

if actions["run_step"]:
    handle_run_step(actions["selected_step"])
    st.rerun()

tab1, tab2, tab3, tab4, tab5 = st.tabs([
    "📊 Pipeline",
    "📋 Results",
    "⚖️ Biases",
    "🔍 Audit",
    "📝 Logs",
])

with tab1:
    render_progress_tracker()
    st.divider()
    render_download_section()

with tab2:
    render_results_table(st.session_state.get("report"))

with tab3:
    render_bias_table(st.session_state.get("report"), st.session_state.get("models") or {})

with tab4:
    st.subheader("Audit a checkpoint")
    uploaded = st.file_uploader("Checkpoint file", type=["ckpt"], key="ckpt_uploader")
    forgotten_text = st.text_input("Forgotten classes", value="3, 4, 5", key="audit_forgotten")
    if uploaded and st.button("Audit", key="btn_audit"):
        handle_audit(uploaded, forgotten_text)
    render_audit_report(st.session_state.get("audit_report"))

with tab5:
    st.subheader("Execution logs")
    render_step_logs()

# Footer with stats
st.divider()

report = st.session_state.get("report")
rows = report.rows if report else []

col1, col2, col3, col4 = st.columns(4)

with col1:
    st.metric("Models evaluated", len([r for r in rows if r.ok]))

with col2:
    st.metric("Failed methods", len([r for r in rows if not r.ok]))

with col3:
    st.metric("Shortcut suspected", len([r for r in rows if r.ok and r.result.bias_dominated_suspected]))

with col4:
    st.metric("Leakage matches", len([r for r in rows if r.ok and r.result.bias.leakage_exact_match]))

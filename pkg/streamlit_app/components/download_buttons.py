"""
Download buttons for the experiment reports.
"""
import json
from datetime import datetime

import streamlit as st

from services.reports import ExperimentReport, bias_frame, report_frame


def render_download_section():
    """Render the download section with report export buttons."""

    st.subheader("Downloads")

    report = st.session_state.get("report")
    models = st.session_state.get("models") or {}
    paths = st.session_state.get("report_paths") or {}

    if report is None:
        st.button("Download reports", disabled=True, key="download_disabled")
        st.caption("No report available")
        return

    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    col1, col2, col3 = st.columns(3)

    with col1:
        st.download_button(
            label=f"Report CSV ({len(report.rows)} rows)",
            data=create_report_csv(report),
            file_name=f"report_{stamp}.csv",
            mime="text/csv",
            type="primary",
            key="download_report_csv",
        )

    with col2:
        st.download_button(
            label="Report JSON",
            data=create_report_json(report),
            file_name=f"report_{stamp}.json",
            mime="application/json",
            key="download_report_json",
        )

    with col3:
        st.download_button(
            label="Bias vectors CSV",
            data=create_bias_csv(report, models),
            file_name=f"bias_vectors_{stamp}.csv",
            mime="text/csv",
            key="download_bias_csv",
        )

    if paths:
        st.caption(" | ".join(f"{kind}: `{path}`" for kind, path in paths.items()))


def create_report_csv(report: ExperimentReport) -> bytes:
    return report_frame(report).to_csv(index=False).encode("utf-8")


def create_report_json(report: ExperimentReport) -> bytes:
    return json.dumps(report.as_dict(), indent=2).encode("utf-8")


def create_bias_csv(report: ExperimentReport, models: dict) -> bytes:
    biases = {name: model.head.bias for name, model in models.items()}
    frame = bias_frame(report.rows, biases, report.config.get("forgotten", []))
    return frame.to_csv(index=False).encode("utf-8")

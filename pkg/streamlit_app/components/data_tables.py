"""
Data table components for experiment results and head biases.
"""
import pandas as pd
import streamlit as st

from services.metrics import BiasReport
from services.reports import ExperimentReport, bias_frame, report_frame


def render_results_table(report: ExperimentReport):
    """Render the per-method results table."""

    if report is None:
        st.info("No results yet. Run the experiment to fill this table.")
        return

    st.subheader(f"Results ({len(report.rows)} rows)")

    df_display = report_frame(report).rename(columns={
        "row": "Model",
        "retain_acc": "Retain acc (%)",
        "forget_acc": "Forget acc (%)",
        "time_s": "Time (s)",
        "rtr": "RTR (%)",
        "bsc": "BSC (%)",
        "mbg": "MBG (%)",
        "mbs": "MBS (%)",
        "leak_match": "Leakage match",
        "suspected": "Shortcut suspected",
    })

    col1, col2 = st.columns(2)

    with col1:
        only_suspected = st.checkbox("Only suspected shortcuts", key="filter_suspected")

    with col2:
        hide_failed = st.checkbox("Hide failed methods", key="filter_failed")

    if only_suspected:
        df_display = df_display[df_display["Shortcut suspected"].fillna(False)]

    if hide_failed:
        df_display = df_display[df_display["status"] == "ok"]

    st.dataframe(df_display, use_container_width=True, hide_index=True)

    failed = [row for row in report.rows if not row.ok]
    for row in failed:
        st.error(f"{row.name}: {row.error}")

    if report.parallel:
        st.caption("Parallel run: time and RTR columns of the method rows are left empty")
    st.caption(f"Retrain time: {report.t_retrain:.6f}s | started {report.started_at}")


def render_bias_table(report: ExperimentReport, models: dict):
    """Render head biases, one row per model and one column per class."""

    if report is None or not models:
        st.info("No models yet.")
        return

    forgotten = report.config.get("forgotten", [])
    long = bias_frame(report.rows, {name: m.head.bias for name, m in models.items()}, forgotten)
    wide = long.pivot(index="row", columns="class", values="bias")
    wide = wide.reindex([row.name for row in report.rows if row.name in models])
    wide.columns = [f"{c}{' (V)' if c in forgotten else ''}" for c in wide.columns]

    st.subheader("Classification-head biases")
    st.dataframe(wide, use_container_width=True)
    st.caption(f"Forgotten classes (V): {forgotten}")


def render_audit_report(report: BiasReport):
    """Render the metrics of an audited checkpoint."""

    if report is None:
        return

    col1, col2, col3 = st.columns(3)
    col1.metric("BSC (%)", f"{report.bsc:.4g}", f"gap {report.mean_gap:+.3f}", delta_color="off")
    col2.metric("MBG (%)", f"{report.mbg:.4g}", f"gap {report.median_gap:+.3f}", delta_color="off")
    col3.metric("MBS (%)", f"{report.mbs:.4g}", f"gap {report.min_gap:+.3f}", delta_color="off")

    st.dataframe(
        pd.DataFrame({
            "class": range(len(report.bias_vector)),
            "bias": report.bias_vector,
            "in_V": [c in report.split.forgotten for c in range(len(report.bias_vector))],
        }),
        use_container_width=True,
        hide_index=True,
    )

    guess = sorted(report.leakage_prediction)
    if report.leakage_exact_match:
        st.warning(f"Leakage attack recovers V exactly: {guess}")
    else:
        st.success(f"Leakage attack guess {guess} does not match V")
    st.markdown(f"**Verdict:** {report.verdict}")

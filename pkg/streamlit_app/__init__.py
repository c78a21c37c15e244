# Streamlit dashboard for head-bias unlearning experiments

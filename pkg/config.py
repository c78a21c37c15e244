"""
Configuration for the head-bias unlearning lab

Supports both:
- Streamlit secrets (st.secrets) when the dashboard runs
- Environment variables (a local .env file is loaded first)
- Local defaults

The hyperparameter defaults below are the desk-scale values; the same values
are written out in configs/default.ini so every experiment records them.
"""
import os

from dotenv import load_dotenv

load_dotenv()

APP_NAME = "head-bias-unlearning"
APP_VERSION = "0.1.0"


def get_setting(key: str, default: str = "") -> str:
    """
    Get a setting from Streamlit secrets or environment variables.
    Priority: st.secrets > os.environ > default
    """
    # Streamlit secrets only exist when a secrets.toml is present
    try:
        import streamlit as st
        if hasattr(st, "secrets") and key in st.secrets:
            return str(st.secrets[key])
    except Exception:
        pass

    return os.getenv(key, default)


# ============================================
# RUNTIME
# ============================================

OUTPUT_DIR = get_setting("HEADBIAS_OUTPUT_DIR", "output")
LOG_LEVEL = get_setting("HEADBIAS_LOG_LEVEL", "INFO")
DEFAULT_CONFIG = get_setting("HEADBIAS_DEFAULT_CONFIG", "configs/default.ini")
DEFAULT_SEED = int(get_setting("HEADBIAS_SEED", "0"))

# ============================================
# DATASET (desk-scale blobs)
# ============================================

BLOBS_CLASS_COUNT = 10
BLOBS_PER_CLASS = 200
BLOBS_DIM = 16
BLOBS_SEPARATION = 6.0
BLOBS_SPREAD = 1.0

# Share of each test class held out to calibrate auto-beta; never evaluated on
CALIBRATION_FRACTION = 0.5

# ============================================
# ARCHITECTURE
# ============================================

HIDDEN_DIM = 32
FEATURE_DIM = 16

# ============================================
# TRAINING (original model and the Retrain reference)
# ============================================

TRAIN_EPOCHS = 2             # original model: briefly trained, not saturated
TRAIN_ETA = 0.1
TRAIN_BATCH_SIZE = 32
RETRAIN_EPOCHS = 30

# ============================================
# UNLEARNING METHODS
# ============================================

# FT, SF, LB-HR
UNLEARN_ETA = 4.0
UNLEARN_EPOCHS = 600
UNLEARN_BATCH_SIZE = 32
LBHR_LAMBDA = 1.0

NEGGRAD_ETA = 0.05
NEGGRAD_EPOCHS = 5
NEGGRAD_BATCH_SIZE = 32
NEGGRAD_RETENTION_WEIGHT = 0.9

RANDOM_LABEL_ETA = 0.05
RANDOM_LABEL_EPOCHS = 10
RANDOM_LABEL_BATCH_SIZE = 8

# TS-BGM / TS-BGRM
DESTROY_ETA = 0.1            # stage 1, gradient ascent on forget
DESTROY_EPOCHS = 3           # upper bound; stage 1 stops once forget accuracy is 0
REPAIR_ETA = 0.05            # stage 2, descent on retain
REPAIR_EPOCHS = 5
TWO_STAGE_BATCH_SIZE = 32

BETA_AUTO_START = 1.0
BETA_AUTO_CAP = 2.0 ** 12
# Extra factor applied once the calibration forget set reaches 0
BETA_AUTO_MARGIN = 2.0

# ============================================
# EVALUATION
# ============================================

# MBS below this (percent) together with zero forget accuracy flags a
# bias-dominated shortcut
SUSPECTED_MBS_THRESHOLD = 25.0

# ============================================
# BIAS SWEEP
# ============================================

SWEEP_BETA_START = -20.0
SWEEP_BETA_STOP = 20.0
SWEEP_BETA_STEPS = 41

# ============================================
# OUTPUT
# ============================================

REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
BIAS_VECTORS_CSV = "bias_vectors.csv"
SWEEP_CSV = "beta_sweep.csv"
CHECKPOINT_DIR = "checkpoints"

import logging
import os

from services.unlearning import Method
from streamlit_app.core.pipeline_runner import OutputCapture, StepLogHandler, load_config
from streamlit_app.core.state_manager import initialize_session_state

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_INI = os.path.join(ROOT, "configs", "default.ini")


def test_load_config_filters_methods():
    cfg = load_config(DEFAULT_INI, ["bias_shift", "lb_hr"], parallel=True)
    assert [m.method for m in cfg.methods] == [Method.RETRAIN, Method.BIAS_SHIFT, Method.LB_HR]
    assert cfg.parallel
    assert cfg.retrain_config().epochs == 30
    assert len(load_config(DEFAULT_INI).methods) == 9


def test_log_records_reach_the_step():
    state = {}
    initialize_session_state(state)
    logger = logging.getLogger("tests.pipeline")
    logger.setLevel(logging.INFO)
    handler = StepLogHandler(4, state)
    logger.addHandler(handler)
    try:
        logger.info("TS-BGRM: done")
    finally:
        logger.removeHandler(handler)
    assert state["steps"][4]["logs"][0].endswith("INFO tests.pipeline: TS-BGRM: done")


def test_output_capture_collects_prints():
    state = {}
    initialize_session_state(state)
    with OutputCapture(2, state):
        print("✓ Trained")
        print("")
    assert len(state["steps"][2]["logs"]) == 1
    assert state["steps"][2]["logs"][0].endswith("✓ Trained")

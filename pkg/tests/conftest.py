import os

import pytest

from relapprox.sampling import Constants, load_constants

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONSTANTS_PATH = os.path.join(REPO_ROOT, "constants.json")


@pytest.fixture(scope="session")
def calibrated_constants() -> Constants:
    """Calibrated constants from the committed config; recalibrate if absent."""
    if not os.path.exists(CONSTANTS_PATH):
        from relapprox.harness import (
            calibrate_constants,
            load_suite,
            write_constants_json,
        )

        suite_path = os.path.join(REPO_ROOT, "calibration_suite.json")
        cases, trials, master_seed = load_suite(suite_path)
        constants, provenance = calibrate_constants(cases, trials, master_seed, workers=2)
        write_constants_json(constants, provenance, CONSTANTS_PATH)
    return load_constants(CONSTANTS_PATH)

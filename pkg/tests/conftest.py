import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def default_bank():
    from eegaffect.fir_filter import design_filter_bank
    return design_filter_bank(128.0)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """The alpha-vs-beta synthetic dataset (100 trials, 0 dB SNR, seed 7)."""
    from eegaffect.cli import main
    root = tmp_path_factory.mktemp("synth") / "alpha_beta"
    assert main(["synth", str(root), "--n-trials", "100", "--seed", "7"]) == 0
    return root


def random_trial(seed: int, n: int = 512, channels=("Fp1", "Fp2", "F3", "F4"), fs=128.0):
    from eegaffect.signal_model import TrialRecording
    rng = np.random.default_rng(seed)
    return TrialRecording(1, 1, channels, rng.normal(0, 10, (len(channels), n)), fs)


def pytest_terminal_summary(terminalreporter):
    try:
        from acceptance_log import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)

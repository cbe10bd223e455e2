import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from ppm_qrf.event_log import chronological_split  # noqa: E402
from ppm_qrf.qrf import Hyperparameters, fit_forest  # noqa: E402
from ppm_qrf.synth import GeneratorConfig, generate_log  # noqa: E402

# compiled kernels make first calls slow; timing is not what properties check
settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_log():
    return generate_log(GeneratorConfig(n_cases=120, seed=11))


@pytest.fixture(scope="session")
def small_split(small_log):
    return chronological_split(small_log[0])


@pytest.fixture(scope="session")
def small_model(small_split):
    tr = small_split.train
    return fit_forest(tr.X, tr.y, Hyperparameters(mtry=8, trees=15, min_n=5, seed=3), encoder=small_split.encoder)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

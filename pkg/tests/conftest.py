import numpy as np
import pytest

from fiberppe.fibersim import PropagationConfig, ssm_propagate, standard_link
from fiberppe.signalgen import make_waveform

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def link():
    return standard_link()


@pytest.fixture(scope="session")
def small_tx():
    # 64 GBd Gaussian, 2^14 samples: enough for order-of-magnitude statistics
    return make_waveform("Gaussian", 4096, 4, 64.0, 0.1, seed=11)


@pytest.fixture(scope="session")
def small_rx(small_tx, link):
    return ssm_propagate(small_tx, link, PropagationConfig(step=0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

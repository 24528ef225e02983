import numpy as np
import pytest
from hypothesis import settings

from cacc_oift.energy import spectrum_from_trajectory
from cacc_oift.freq import ControllerParams
from cacc_oift.trajectory import stop_and_go, trajectory_arrays

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

DT = 0.1


@pytest.fixture(scope="session")
def params():
    return ControllerParams()


@pytest.fixture(scope="session")
def leader():
    return stop_and_go()


@pytest.fixture(scope="session")
def spectrum(leader):
    _, x = trajectory_arrays(leader)
    return spectrum_from_trajectory(x, DT)


def random_spectrum(rng, duration=240.0, components=4):
    """Band-limited leader: constant speed plus a few random sinusoids."""
    t = np.arange(0.0, duration + DT / 2, DT)
    x = 12.0 * t
    for _ in range(components):
        period = rng.uniform(8.0, 80.0)
        amp = rng.uniform(0.5, 3.0)
        x = x + amp * period / (2 * np.pi) * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    return spectrum_from_trajectory(x, DT)


REPORT: dict = {}


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for n in sorted(REPORT):
            terminalreporter.write_line(REPORT[n])

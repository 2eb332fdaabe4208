import os

import numpy as np
import pytest
from hypothesis import settings

from jointinfluence import ModelParams, PointSequence

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
BUNDLED_DIR = os.path.join(os.path.dirname(__file__), "..", "src",
                           "jointinfluence", "data")


def one_channel(eta=0.5, alpha=1.0, nu=1.0, rho=3.0, mu=2.0, phi=1.0, psi=0.0):
    return ModelParams(eta=[eta], alpha=[alpha], mic=[[nu]], rho=[rho],
                       mu=[mu], phi=[phi], psi=[psi])


def random_params(rng, k, max_radius=0.9):
    mic = rng.uniform(0, 1, (k, k))
    mic *= rng.uniform(0.05, max_radius) / max(np.abs(np.linalg.eigvals(mic)))
    return ModelParams(
        eta=rng.uniform(0.05, 1.0, k), alpha=rng.uniform(0.2, 3.0, k), mic=mic,
        rho=rng.uniform(2.1, 8.0, k), mu=rng.uniform(0.2, 5.0, k),
        phi=rng.uniform(0.0, 2.0, k), psi=rng.uniform(0.01, 2.0, k))


def random_sequence(rng, k, n, horizon=50.0):
    times = np.sort(rng.uniform(0.01, horizon, n))
    times = np.unique(times)
    return PointSequence(times, rng.integers(0, k, times.size),
                         rng.exponential(1.5, times.size), 0.0, horizon + 1.0, k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_point_seq():
    return PointSequence([1.0, 2.0], [0, 0], [0.0, 0.0], 0.0, 3.0, 1)


ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

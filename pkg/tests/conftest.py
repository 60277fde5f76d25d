import sys

import numpy as np
import pytest
from hypothesis import settings

from capa import Scenario, User, build_grid, correlation_matrix, random_scenario, sample_channel

settings.register_profile("capa", deadline=None, max_examples=50)
settings.load_profile("capa")


def gram(scenario, order=20):
    grid = build_grid(scenario.aperture, order)
    samples = sample_channel(grid, scenario)
    return correlation_matrix(grid, samples), grid, samples


def on_axis(distance=20.0, **kwargs):
    return Scenario(users=(User((0.0, 0.0, distance)),), **kwargs)


def random_coefficients(rng, K):
    return rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))


@pytest.fixture
def four_users():
    scenario = random_scenario(7, 4)
    Q, grid, samples = gram(scenario)
    return scenario, Q, grid, samples


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for name in sorted(results, key=lambda n: int(n.split()[0][1:])):
            terminalreporter.write_line(results[name])

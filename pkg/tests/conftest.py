import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qkr.core import GaussianSpec, Lattice, ResonanceParams, gaussian_state

KAPPA = 0.25


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lattice():
    return Lattice.symmetric(128)


@pytest.fixture
def primary():
    return ResonanceParams(1, 1, KAPPA)


@pytest.fixture
def travelling(lattice):
    """The Gaussian of the traveling-wavepacket figure: sigma0 = 1, theta0 = pi/2."""
    return gaussian_state(lattice, GaussianSpec(1.0, math.pi / 2))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    def report(label: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

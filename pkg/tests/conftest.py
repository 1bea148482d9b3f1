import math
import warnings
from fractions import Fraction

import pytest

from thermopiston import CoolingParams, LinearDrive, OscillatorParams
from thermopiston.errors import RegimeWarning, ValidityWarning

KB = 1.380649e-23
HBAR = 1.054571817e-34
# exact SI Planck constant; hbar * 2 pi * 1 MHz equals H_PLANCK * 1e6 up to rounding
H_PLANCK = 6.62607015e-34
OMEGA = 2 * math.pi * 1e6


def kb_exact():
    return Fraction("1.380649e-23")


@pytest.fixture
def osc():
    return OscillatorParams.default()


@pytest.fixture
def drive():
    return LinearDrive.default()


@pytest.fixture
def undriven():
    return LinearDrive.undriven()


@pytest.fixture
def regime(osc):
    """gamma_L = 2 pi 1e3 /s, gamma_M / m = 2 pi 10 /s, so eps = 1e-2."""
    return osc.mass * 2 * math.pi * 10.0, CoolingParams(2 * math.pi * 1e3)


@pytest.fixture(autouse=True)
def _silence_expected_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        warnings.simplefilter("ignore", RegimeWarning)
        yield


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])

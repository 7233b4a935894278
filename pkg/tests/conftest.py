import numpy as np
import pytest

from doakit.doa import NegDefSpec, doa_pipeline
from doakit.expr import PlantModel, parse
from doakit.interval import IvBox

PLANT_TEXT = "-sin(2*x1) - x1*u1 - 0.2*x1 - u1^2 + u1"
QUARTIC = "2.4468*x1^2 + 3.4186*x1^3 + 1.4524*x1^4"


@pytest.fixture(scope="session")
def plant():
    return PlantModel.from_strings([PLANT_TEXT], 1, 1)


@pytest.fixture(scope="session")
def cons():
    return IvBox.from_bounds([-2.0, -2.0], [2.0, 2.0], n_state=1, m_ctrl=1)


@pytest.fixture(scope="session")
def spec_square(plant, cons):
    return NegDefSpec(plant, parse("x1^2", 1), cons, 1e-15, 0.01)


@pytest.fixture(scope="session")
def spec_quartic(plant, cons):
    return NegDefSpec(plant, parse(QUARTIC, 1), cons, 1e-15, 0.01)


@pytest.fixture(scope="session")
def est_square(spec_square):
    return doa_pipeline(spec_square)


@pytest.fixture(scope="session")
def est_quartic(spec_quartic):
    return doa_pipeline(spec_quartic)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label, ok, detail, why_red=None):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line if why_red is None else f"{line}; {why_red}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

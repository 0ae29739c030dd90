import numpy as np
import pytest

from cmlab.spectral import Geometry, random_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def torus64():
    return Geometry.torus(64)


@pytest.fixture
def line64():
    return Geometry.line(64, 24.0)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def random_q(geometry, rng, mass=1.0, sign="focusing"):
    return random_state(geometry, rng, mass, sign)


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = {}
    for mod in list(sys.modules.values()):
        lines.update(getattr(mod, "ACCEPTANCE_RESULTS", {}) or {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])

import numpy as np
import pytest

from vortexwave.fields import Grid2D, ScalarField
from vortexwave.oseen_ops import G_field


@pytest.fixture(scope="session")
def xi512():
    return Grid2D(32.0, 512, stagger=0.0)


@pytest.fixture(scope="session")
def xi256():
    return Grid2D(32.0, 256, stagger=0.0)


@pytest.fixture(scope="session")
def xi128():
    return Grid2D(32.0, 128, stagger=0.0)


@pytest.fixture(scope="session")
def G512(xi512):
    return G_field(xi512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def radial_bump(grid: Grid2D, center=(0.0, 0.0), rho=0.5, mass=None) -> ScalarField:
    """Smooth compactly supported radial bump, optionally normalised to ``mass``."""
    r = grid.radius(center)
    s = np.clip(r / rho, 0.0, 1.0)
    v = np.where(s < 1.0, (1.0 - s * s) ** 4, 0.0)
    f = ScalarField(grid, v)
    if mass is not None:
        f = f.scaled(mass / f.integral())
    return f


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, name: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {name}: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

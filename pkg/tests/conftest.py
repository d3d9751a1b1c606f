import numpy as np
import pytest

from ledmax.functional import Configuration, lambertian_exponent
from ledmax.rng import SplitMix64
from ledmax.studyfile import gen_circle, gen_lattice

M70 = lambertian_exponent(70.0)

# filled by the acceptance suite, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def circle():
    return gen_circle(20, 1.2).configuration()


@pytest.fixture(scope="session")
def lattice():
    return gen_lattice().configuration()


@pytest.fixture(scope="session")
def lattice_rows():
    return gen_lattice(layout="rows").configuration()


def random_configuration(rng: SplitMix64, n: int, extent: float = 2.0) -> Configuration:
    pts = [(rng.uniform_in(-extent / 2, extent / 2), rng.uniform_in(-extent / 2, extent / 2)) for _ in range(n)]
    return Configuration(np.array(pts), rng.uniform_in(3.05, 3.95))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gpfem.elements import ElementKind, build_space
from gpfem.mesh import Domain, build_mesh

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SQUARE = Domain.square(-1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def square_space(n, kind=ElementKind.EQ1ROT, **kw):
    return build_space(build_mesh(SQUARE, n, n), kind, **kw)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

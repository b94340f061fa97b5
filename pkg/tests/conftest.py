import numpy as np
import pytest

from maternspde.mesh import Mesh, icosphere, rectangle, triangulate_quads, unit_interval


@pytest.fixture
def interval8():
    return unit_interval(8)


@pytest.fixture
def square4():
    return rectangle(4, 4)


@pytest.fixture
def tri_square():
    return triangulate_quads(rectangle(3, 3))


@pytest.fixture
def sphere2():
    return icosphere(2)


@pytest.fixture
def flat_surface():
    """Counterclockwise triangulated unit square living in the z=0 plane."""
    nodes = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    return Mesh(nodes, np.array([[0, 1, 2], [0, 2, 3]]), "triangle")


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])

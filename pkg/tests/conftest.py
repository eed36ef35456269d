import numpy as np
import pytest

from deltastab.mesh import Rect, build_structured_mesh, refine

# lines reported by test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_square():
    return Rect(1.0, 1.0)


@pytest.fixture(scope="session")
def mesh4(unit_square):
    return build_structured_mesh(unit_square, 4, 4)


@pytest.fixture(scope="session")
def mesh8(unit_square):
    return build_structured_mesh(unit_square, 8, 8)


@pytest.fixture(scope="session")
def hierarchy13(unit_square):
    """13 x 13 base mesh and two refinements (196, 729, 2809 vertices)."""
    meshes = [build_structured_mesh(unit_square, 13, 13)]
    for _ in range(2):
        meshes.append(refine(meshes[-1]))
    return meshes


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

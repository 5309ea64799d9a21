import numpy as np
import pytest

from spectralstab.mesh import LatticeSpec, build_flat_torus, build_icosphere, build_unit_area_sphere


@pytest.fixture(scope="session")
def ico3():
    return build_icosphere(3)


@pytest.fixture(scope="session")
def ico4():
    return build_icosphere(4)


@pytest.fixture(scope="session")
def unit_sphere4():
    return build_unit_area_sphere(4)


@pytest.fixture(scope="session")
def square24():
    return build_flat_torus(LatticeSpec.square(), 24)


@pytest.fixture(scope="session")
def square48():
    return build_flat_torus(LatticeSpec.square(), 48)


@pytest.fixture(scope="session")
def equilateral48():
    return build_flat_torus(LatticeSpec.equilateral(), 48)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list = []


@pytest.fixture
def criterion():
    """Record one acceptance line ``(label, verdict, detail)``; printed in the terminal summary."""
    def record(label: str, ok, detail: str = ""):
        verdict = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"{label}: {verdict}" + (f"  [{detail}]" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)

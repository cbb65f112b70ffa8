import math
from pathlib import Path

import numpy as np
import pytest

from jacobi_hill.metrics import example_torus, flat_chart, round_sphere_chart, validate_kolokoltsov

SIN2 = "sin(2*pi*x)^2"
SIN2_Y = "sin(2*pi*y)^2"
PERTURBED = "sin(2*pi*x)^2 - 0.75*sin(2*pi*x)^4"
PERTURBED_Y = "sin(2*pi*y)^2 - 0.75*sin(2*pi*y)^4"

C_EXAMPLE = math.pi * math.sqrt(2.0)

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def torus():
    return example_torus()


@pytest.fixture(scope="session")
def flat():
    return flat_chart()


@pytest.fixture(scope="session")
def round_sphere():
    return round_sphere_chart()


@pytest.fixture(scope="session")
def sphere_sin2():
    return validate_kolokoltsov(SIN2, SIN2_Y, 1.0, 4)


@pytest.fixture(scope="session")
def sphere_perturbed():
    return validate_kolokoltsov(PERTURBED, PERTURBED_Y, 1.0, 4)


@pytest.fixture(scope="session")
def sphere_sin2_solution(sphere_sin2):
    from jacobi_hill.sphere import fundamental_solution_sphere

    return fundamental_solution_sphere(sphere_sin2, require_hyperbolic=False)


@pytest.fixture(scope="session")
def sphere_perturbed_solution(sphere_perturbed):
    from jacobi_hill.sphere import fundamental_solution_sphere

    return fundamental_solution_sphere(sphere_perturbed, require_hyperbolic=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# --------------------------------------------------------------------------
# One pass/fail line per acceptance criterion at the end of the run
# --------------------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    prev = _CRITERIA.get(number)
    passed = rep.passed and (prev is None or prev[1])
    _CRITERIA[number] = (title, passed, detail or (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)

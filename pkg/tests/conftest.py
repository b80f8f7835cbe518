import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ltransport import models  # noqa: E402

_acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else "FAIL"
        _acceptance[number] = f"[{status}] criterion {number:>2}: {text}"


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_acceptance):
            terminalreporter.write_line(_acceptance[number])


@pytest.fixture
def flat():
    return models.make_flat()


@pytest.fixture
def rotation_model():
    return models.make_constant_coefficient(models.ROTATION_GENERATOR)


@pytest.fixture
def sphere():
    return models.make_sphere_levi_civita()


@pytest.fixture
def torsion_plane():
    return models.make_constant_torsion_plane()


@pytest.fixture
def ramp():
    return models.make_scalar_ramp()


@pytest.fixture
def sphere_coords():
    return models.coordinate_family(((0.3, np.pi - 0.3), (-1.0, 3.0)), name="sphere-coords")


@pytest.fixture
def unit_coords():
    return models.coordinate_family(((-1.0, 2.0), (-1.0, 2.0)))

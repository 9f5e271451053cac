import warnings

import numpy as np
import pytest

from pcbfea.errors import NonPhysicalMaterialWarning
from pcbfea.model import Material, aed_reference_model, material_db


@pytest.fixture(scope="session")
def fr4() -> Material:
    return material_db()["FR4 epoxy"]


@pytest.fixture(scope="session")
def steel() -> Material:
    return Material("steel", 200e9, 0.3, 7850.0, 50.0, 490.0)


@pytest.fixture(scope="session")
def aed4():
    # the lithium modulus is deliberately kept verbatim and warns
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonPhysicalMaterialWarning)
        return aed_reference_model(4)


@pytest.fixture(scope="session")
def aed8():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonPhysicalMaterialWarning)
        return aed_reference_model(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(number: int, checks: dict[str, bool], detail: str = ""):
        ok = all(checks.values())
        failed = ", ".join(k for k, v in checks.items() if not v)
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}" + (f"  [failed: {failed}]" if failed else "")
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

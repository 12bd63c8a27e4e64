from __future__ import annotations

import numpy as np
import pytest

from orbitlab.fields import NumberField, builtin_catalog


@pytest.fixture(scope="session")
def cubic81():
    return NumberField.from_catalog(builtin_catalog()["cubic-81"])


@pytest.fixture(scope="session")
def cubic49():
    return NumberField.from_catalog(builtin_catalog()["cubic-49"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, ok, detail)."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

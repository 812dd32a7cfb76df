import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from survey_equivalence.core import LabelSpace, validate_matrix  # noqa: E402
from survey_equivalence.synthetic import generate, running_example_model  # noqa: E402

BINARY = LabelSpace(("C", "D"))


@pytest.fixture(scope="session")
def binary():
    return BINARY


@pytest.fixture
def tiny_matrix():
    return validate_matrix({"i1": ["C", "D"], "i2": ["C", "C"]}, BINARY)


@pytest.fixture(scope="session")
def running_1000():
    """Running-example model, 1000 items x 10 raters."""
    return generate(running_example_model(), 1000, 10, 1)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])

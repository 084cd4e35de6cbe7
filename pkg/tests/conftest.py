import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("hifisher", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("hifisher")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion and return the verdict."""

    def record(label, ok, detail=""):
        line = f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

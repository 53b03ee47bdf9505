import numpy as np
import pytest

from support import make_problem


@pytest.fixture(scope="session")
def free_problem():
    """6x6 quad patch with no essential boundary conditions, assembled."""
    pb = make_problem()
    pb.assemble()
    return pb


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from support import VERDICTS

    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

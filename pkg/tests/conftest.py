import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tppood.core import EventSequence, TransformedSequence

settings.register_profile("repo", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def tmp_jsonl(tmp_path):
    return tmp_path / "data.jsonl"


def seq(times, t_max, marks=None, k=1):
    return EventSequence(np.asarray(times, dtype=float), t_max, marks, k)


def tseq(points, v_max):
    return TransformedSequence(np.asarray(points, dtype=float), v_max)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_report():
    def report(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[criterion] = line
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])

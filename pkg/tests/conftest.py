import numpy as np
import pytest

from geomap.expr import backend

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{criterion:<2} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


BACKENDS = sorted(backend.available())


@pytest.fixture(params=BACKENDS)
def each_backend(request):
    prev = backend.use(request.param)
    yield request.param
    backend.use(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

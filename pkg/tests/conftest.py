import functools

import pytest

from tubelab.tubes import build_family


@functools.lru_cache(maxsize=None)
def family(d, delta):
    return build_family(d, delta)


@pytest.fixture(scope="session")
def fam():
    return family


ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)

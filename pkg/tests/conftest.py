import pytest

from horoke.datum import preset
from horoke.kesolver import solve


@pytest.fixture(scope="session")
def p2():
    return preset("P2_CONIC")


@pytest.fixture(scope="session")
def blowup():
    return preset("BLOWUP_P2xP2")


@pytest.fixture(scope="session")
def p2_solutions(p2):
    # shared solves; each takes well under a second
    return {s: solve(p2, s) for s in (0.0, 0.3, 0.5, 0.55, 0.6, 0.65, 0.7, 0.72, 0.74, 0.745)}


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, ok, detail):
        lines[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(lines[number])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])

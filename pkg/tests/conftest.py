import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


_acceptance_key = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title, checks)``.

    ``checks`` is a list of ``(label, ok, detail)``. The line is printed
    immediately and again in the terminal summary; the caller asserts.
    """
    results = request.config.stash.setdefault(_acceptance_key, [])

    def record(number, title, checks):
        ok = all(c[1] for c in checks)
        parts = "; ".join(f"{label}: {detail} [{'ok' if good else 'FAIL'}]"
                          for label, good, detail in checks)
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}) | {parts}"
        results.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)

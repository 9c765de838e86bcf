import time

import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Time a criterion body and record one PASS/FAIL line for the summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def run(label, body):
        start = time.perf_counter()
        try:
            body()
        except BaseException as exc:
            line = f"FAIL  {label}  ({time.perf_counter() - start:.2f}s)  {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            print(line)
            lines.append(line)
            raise
        line = f"PASS  {label}  ({time.perf_counter() - start:.2f}s)"
        print(line)
        lines.append(line)

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

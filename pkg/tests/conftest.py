import contextlib

import pytest

_RESULTS = {}


@contextlib.contextmanager
def _criterion(number, title):
    """Record one acceptance line; any exception inside counts as a failure."""
    note = {"detail": ""}
    try:
        yield note
    except BaseException as exc:
        _RESULTS[number] = (title, False, note["detail"] or f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    else:
        _RESULTS[number] = (title, True, note["detail"])


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)

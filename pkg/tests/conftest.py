import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Append one verdict line for the end-of-run acceptance summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def add(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok

    return add


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(text)

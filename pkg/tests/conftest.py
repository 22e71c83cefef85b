import pytest

# outcome and detail per acceptance criterion, printed after the run so the
# one-line verdicts survive output capturing
_OUTCOMES: dict[str, str] = {}
_NOTES: dict[str, str] = {}


@pytest.fixture
def note(request):
    """Let a criterion test attach a short measurement summary to its verdict."""

    def _record(message: str) -> None:
        _NOTES[request.node.name] = message

    return _record


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.failed:
        _OUTCOMES[name] = "failed"
    elif report.when == "call" and name not in _OUTCOMES:
        _OUTCOMES[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_OUTCOMES):
        tag = "PASS" if _OUTCOMES[name] == "passed" else "FAIL"
        detail = _NOTES.get(name, "")
        suffix = f" -- {detail}" if detail else ""
        terminalreporter.write_line(f"[{tag}] {name}{suffix}")

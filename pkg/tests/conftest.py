import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with (number, title) then ``.done(ok, detail)``."""

    class _Recorder:
        def __call__(self, number, title):
            self.key = (number, title)
            _CRITERIA[self.key] = (False, "did not finish")
            return self

        def done(self, ok, detail=""):
            _CRITERIA[self.key] = (bool(ok), detail)
            return ok

    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (ok, detail) in sorted(_CRITERIA.items()):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")

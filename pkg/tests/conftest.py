import pytest

from kleinstep.verify import VerifyContext

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def verify_ctx():
    """One context per session so packet runs are shared across test files."""
    return VerifyContext()


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)

import pytest

# criterion name -> (passed, detail); filled by the acceptance module
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(name, passed, detail=""):
        ACCEPTANCE[name] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")

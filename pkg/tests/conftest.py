import pytest

from stellar import gaussian

# Every Fock expansion in the suite is cross-checked against the matrix oracle.
gaussian.VERIFY_FOCK = True

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _ACCEPTANCE.append((props["criterion"], "PASS" if report.passed else "FAIL", props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(_ACCEPTANCE, key=lambda t: int(t[0].split()[0])):
        terminalreporter.write_line(f"[{verdict}] criterion {name}: {detail}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240611)

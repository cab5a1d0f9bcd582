import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "psnn", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("psnn")

# criterion number -> (passed, description), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {desc}")


@pytest.fixture(scope="session")
def iris():
    from psnn.codec import load_dataset

    return load_dataset()


@pytest.fixture(scope="session")
def iris_full_run(iris):
    from psnn.trainer import run_iris

    return run_iris(iris, "paper")

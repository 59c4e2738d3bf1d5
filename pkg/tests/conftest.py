import pytest

from avcoord.experiments import run_jobs, matrix_jobs, write_outputs
from avcoord.network import generate_network

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def default_network():
    return generate_network(86, 161, seed=1)


@pytest.fixture(scope="session")
def matrix_serial(default_network, tmp_path_factory):
    """Full default matrix, three trials, one process; outputs written to disk."""
    results = run_jobs(default_network, matrix_jobs(3, base_seed=0), parallelism=1)
    out = tmp_path_factory.mktemp("matrix_p1")
    write_outputs(out, default_network, results)
    return results, out


@pytest.fixture(scope="session")
def matrix_parallel(default_network, tmp_path_factory):
    results = run_jobs(default_network, matrix_jobs(3, base_seed=0), parallelism=8)
    out = tmp_path_factory.mktemp("matrix_p8")
    write_outputs(out, default_network, results)
    return results, out


@pytest.fixture
def acceptance():
    """Record one acceptance criterion's outcome for the terminal summary."""

    def record(number: int, passed: bool, note: str = "") -> None:
        ACCEPTANCE[number] = (passed, note)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {note}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, note = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {note}".rstrip())

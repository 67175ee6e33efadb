import pytest

from bitextfilter import kernels
from bitextfilter.toy import load_bundled_corpus, load_bundled_donors

# (criterion, "PASS" | "FAIL" | "SKIP", detail)
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


@pytest.fixture(scope="session")
def toy():
    return load_bundled_corpus()


@pytest.fixture(scope="session")
def donors():
    return load_bundled_donors()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status}  {name}  {detail}")

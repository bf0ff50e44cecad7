import pytest

from bubbletower.cascade import TowerConfig, build_table


@pytest.fixture(scope="session")
def ref_config():
    return TowerConfig(m=2, tau=1.0, alpha1=2.5, rho=0.05)


@pytest.fixture(scope="session")
def ref_table(ref_config):
    return build_table(ref_config)


@pytest.fixture(scope="session")
def m3_config():
    # on an excluded lattice, kept for the worked examples that use it
    return TowerConfig(m=3, tau=2.0, alpha1=3.0, rho=0.1, skip_admissibility=True)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""
    log = request.config.stash.setdefault(_VERDICTS, [])

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        log.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_VERDICTS, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from khbench import build_quad_mesh, build_space


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long running (minutes or more)")


@pytest.fixture(scope="session")
def space_n4k2():
    return build_space(build_quad_mesh(4), 2)


@pytest.fixture(scope="session")
def space_n8k4():
    return build_space(build_quad_mesh(8), 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        tr.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")

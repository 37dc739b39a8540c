import numpy as np
import pytest

from ibnls.grid import GridSpec, build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid1():
    return build_grid(GridSpec(1, 512, 20.0))


@pytest.fixture(scope="session")
def grid2():
    return build_grid(GridSpec(2, 64, 10.0))


def gaussian(grid, amp=1.0, width=1.0, center=None, kick=None):
    N = grid.N
    center = np.zeros(N) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x - c) ** 2 for x, c in zip(grid.mesh, center))
    vals = amp * np.exp(-r2 / (2.0 * width ** 2))
    if kick is not None:
        vals = vals * np.exp(1j * sum(k * x for k, x in zip(kick, grid.mesh)))
    return grid.field(vals)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])

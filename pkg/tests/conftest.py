import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixnl.discretization import assemble, build_mesh  # noqa: E402
from mixnl.measure import from_atoms, from_density  # noqa: E402
from mixnl.nonlinearity import PowerNonlinearity  # noqa: E402

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    _CRITERIA.setdefault(marker.args[0], []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        runs = _CRITERIA[n]
        ok = all(passed for _, passed in runs)
        failed = [name for name, passed in runs if not passed]
        detail = f"{len(runs)} case(s)" + (f"; failing: {', '.join(failed)}" if failed else "")
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


MEASURES = {
    "delta_half": lambda: from_atoms([(0.5, 1.0)]),
    "two_atoms": lambda: from_atoms([(0.3, 1.0), (0.7, 2.0)]),
    "uniform_density": lambda: from_density(lambda s: np.ones_like(s), 8),
}


@pytest.fixture(scope="session")
def cubic():
    return PowerNonlinearity(1.0, 4.0)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh((-1.0, 1.0), 8.0, 32, 8)


@pytest.fixture(scope="session")
def small_ops(small_mesh):
    return assemble(small_mesh, from_atoms([(0.5, 1.0)]), 0.0)


@pytest.fixture(scope="session")
def delta_ops():
    """delta_{1/2}, alpha = 0 on (-1, 1) at the acceptance resolution."""
    return assemble(build_mesh((-1.0, 1.0), 8.0, 128, 32), from_atoms([(0.5, 1.0)]), 0.0)


@pytest.fixture(scope="session")
def acceptance_ops():
    mesh = build_mesh((-1.0, 1.0), 8.0, 128, 32)
    return {name: assemble(mesh, make(), 0.0) for name, make in MEASURES.items()}

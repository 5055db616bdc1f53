import numpy as np
import pytest

from cnls.core import VecField, make_grid
from cnls.groundstate import solve_townes_petviashvili, solve_townes_shooting

# Radial shooting oracle, run once before the main build and frozen here.
SHOOTING_Q0 = 2.2062008646507
SHOOTING_MASS2 = 11.7008965246


@pytest.fixture(scope="session")
def grid256():
    return make_grid(32.0, 256)


@pytest.fixture(scope="session")
def townes(grid256):
    return solve_townes_petviashvili(grid256)


@pytest.fixture(scope="session")
def townes_shooting():
    return solve_townes_shooting()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, grid, n, offset=0):
    data = rng.standard_normal((n, grid.M, grid.M)) + 1j * rng.standard_normal((n, grid.M, grid.M))
    return VecField(grid, data, offset)


def smooth_localized_field(rng, grid, n, bandwidth=3.0, width=2.0):
    """Band-limited random field under a Gaussian envelope."""
    kx, ky = grid.wavenumbers
    coef = rng.standard_normal((n, grid.M, grid.M)) + 1j * rng.standard_normal((n, grid.M, grid.M))
    coef *= np.exp(-(kx**2 + ky**2) / (2 * bandwidth**2))
    f = np.fft.ifft2(coef, axes=(-2, -1))
    X, Y = grid.coords
    f *= np.exp(-(X**2 + Y**2) / (2 * width**2))
    return VecField(grid, f / np.abs(f).max())


def gaussian_field(grid, amplitudes, width=1.0, offset=0):
    X, Y = grid.coords
    g = np.exp(-(X**2 + Y**2) / (2 * width**2))
    return VecField(grid, np.array([a * g for a in amplitudes], dtype=complex), offset)


# ---------------------------------------------------------------- acceptance report

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        if marker is not None and report.when == "setup" and report.failed:
            _CRITERIA.append((marker.args, "FAIL", "setup error"))
        return
    detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
    _CRITERIA.append((marker.args, "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), status, detail in sorted(_CRITERIA, key=lambda c: c[0][0]):
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} | {detail}")

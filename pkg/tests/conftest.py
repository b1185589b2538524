import numpy as np
import pytest

from qgeo import (ParamPath, spin_field_family, three_state_config_family, three_state_family,
                  two_level_family)
from qgeo.verify import default_loop, default_path


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def canon():
    return three_state_family()


@pytest.fixture(scope="session")
def config():
    return three_state_config_family()


@pytest.fixture(scope="session")
def qp():
    return two_level_family("qp")


@pytest.fixture(scope="session")
def bloch():
    return two_level_family("bloch")


@pytest.fixture(scope="session")
def spin():
    return spin_field_family()


@pytest.fixture(scope="session")
def apt_path():
    return default_path()


@pytest.fixture(scope="session")
def loop():
    return default_loop()


def smooth_gauge(seed):
    """Random smooth phase function f(x) = sum_k a_k sin(b_k . x + c_k)."""
    r = np.random.default_rng(seed)
    a, c = r.normal(size=3), r.uniform(0, 2 * np.pi, 3)
    b = r.normal(size=(3, 4))

    def f(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(a * np.sin(b[:, : x.size] @ x + c)))
    return f


def equator_loop(z=0.0, r=None):
    """Horizontal circle of the spin-field model at height z."""
    r = np.sqrt(1.0 - z * z) if r is None else r
    return ParamPath.ellipse([0.0, 0.0, z], [r, 0.0, 0.0], [0.0, r, 0.0])


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)

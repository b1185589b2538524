import numpy as np
import pytest
from scipy.linalg import expm

from qgeo import (AdiabaticExpansion, ConfigError, DrivenSystem, FitRejected, ParamPath,
                  constant_family, eigensystem, order_check, propagate)
from qgeo import oracle

H0 = np.array([[0.2, 0.3 - 0.1j, 0.0], [0.3 + 0.1j, 1.0, 0.4j], [0.0, -0.4j, 1.7]])


@pytest.fixture(scope="module")
def const_system():
    return DrivenSystem(constant_family(H0), ParamPath.constant([0.0], closed=False), 5.0)


@pytest.fixture(scope="module")
def expansion(config, apt_path):
    return AdiabaticExpansion(config, apt_path, 0, 3)


def test_eigenstate_only_acquires_phase(const_system):
    fr = eigensystem(const_system.family, [0.0], 0)
    res = propagate(const_system, fr.state, [0.0, 0.5, 1.0])
    for t, psi in zip(res.times, res.states):
        assert np.max(np.abs(psi - np.exp(-1j * fr.energy * t) * fr.state)) < 1e-11


def test_generic_state_matches_matrix_exponential(const_system, rng):
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi0 /= np.linalg.norm(psi0)
    res = propagate(const_system, psi0, [1.0])
    assert np.max(np.abs(res.states[-1] - expm(-1j * H0 * 5.0) @ psi0)) < 1e-10


def test_norm_drift_on_driven_path(config, apt_path):
    sysm = DrivenSystem(config, apt_path, 100.0)
    psi0 = eigensystem(config, apt_path(0.0), 0).state
    assert propagate(sysm, psi0).norm_drift < 1e-10


def test_initial_state_validated(const_system):
    with pytest.raises(ConfigError):
        propagate(const_system, [1.0, 1.0, 0.0])
    with pytest.raises(ConfigError):
        propagate(const_system, [1.0, 0.0])


def test_constant_hamiltonian_is_exact(const_system):
    fit = order_check(const_system, 0, [25, 50, 100, 200])
    assert fit.exact and fit.passed()
    assert np.all(fit.errors < oracle.NOISE_FLOOR)


def test_second_order_slope(config, apt_path, expansion):
    sysm = DrivenSystem(config, apt_path, 25.0)
    fit = order_check(sysm, 2, [25, 50, 100, 200], expansion=expansion)
    assert fit.slope >= 2.7 and fit.r2 >= 0.98
    assert abs(fit.slope - fit.slope_phase_min) < 0.05
    np.testing.assert_allclose(fit.eps, 1.0 / np.array([25, 50, 100, 200]))


def test_errors_decrease_with_order(expansion):
    errs = [oracle.apt_errors(expansion, 100.0, order=p)[0] for p in range(4)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_integrator_error_is_subdominant(expansion):
    a = oracle.apt_errors(expansion, 100.0, order=3, tol=1e-12)[0]
    b = oracle.apt_errors(expansion, 100.0, order=3, tol=5e-13)[0]
    assert abs(a - b) < 0.01 * a


def test_poor_fit_is_rejected(const_system, monkeypatch):
    noisy = iter([(1e-3, 1e-3), (5e-3, 5e-3), (2e-4, 2e-4), (4e-3, 4e-3)])
    monkeypatch.setattr(oracle, "apt_errors", lambda *a, **k: next(noisy))
    with pytest.raises(FitRejected) as info:
        order_check(const_system, 0, [25, 50, 100, 200], expansion=object())
    assert info.value.fit.r2 < oracle.R2_MIN


def test_needs_several_times(const_system):
    with pytest.raises(ConfigError):
        order_check(const_system, 0, [25])

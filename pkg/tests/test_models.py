import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeo import (CanonicalState, DegenerateLevel, DomainError, FrameMismatch, NonHermitian,
                  StepUnderflow, constant_family, eigensystem, gauge_fix, grad_H,
                  matrix_polynomial, three_state, three_state_family)
from qgeo.models import HamiltonianFamily, canonical_from_angles, three_state_angular

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def test_diagonal_matrix_ground_state():
    fam = constant_family(np.diag([0.0, 1.0, 2.0]))
    fr = eigensystem(fam, [0.0], 0)
    assert fr.energy == pytest.approx(0.0)
    np.testing.assert_allclose(fr.state, [1, 0, 0], atol=1e-15)
    assert fr.gap == pytest.approx(1.0)


def test_sigma_x_ground_state():
    fr = eigensystem(constant_family(SX), [0.0], 0)
    assert fr.energy == pytest.approx(-1.0)
    np.testing.assert_allclose(fr.state, np.array([1, -1]) / np.sqrt(2), atol=1e-14)


def _charpoly_roots(H):
    # coefficients of det(lam - H) from traces, roots by the companion matrix
    t1 = np.trace(H)
    t2 = np.trace(H @ H)
    c = [1.0, -t1, 0.5 * (t1 * t1 - t2), -np.linalg.det(H)]
    return np.sort(np.roots(np.real_if_close(np.array(c))).real)


def test_three_state_energy_matches_characteristic_polynomial(canon):
    xi = np.array([0.3, 0.7, 0.6, 0.2])
    fr = eigensystem(canon, xi, 0)
    roots = _charpoly_roots(canon(xi))
    assert fr.energy == pytest.approx(roots[0], abs=1e-10)
    np.testing.assert_allclose(fr.energies, roots, atol=1e-10)


def test_degenerate_level_raises():
    with pytest.raises(DegenerateLevel):
        eigensystem(constant_family(np.eye(2)), [0.0], 0)


def test_gap_tol_is_configurable():
    fam = constant_family(np.diag([0.0, 1e-3]))
    assert eigensystem(fam, [0.0], 0).gap == pytest.approx(1e-3)
    with pytest.raises(DegenerateLevel):
        eigensystem(fam, [0.0], 0, gap_tol=1e-2)


def test_non_hermitian_raises():
    with pytest.raises(NonHermitian):
        eigensystem(constant_family(np.array([[0, 1], [0, 0]], dtype=complex)), [0.0], 0)


def test_level_out_of_range():
    with pytest.raises(IndexError):
        eigensystem(constant_family(SX), [0.0], 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_eigenframe_invariants(seed):
    fam = three_state_family()
    xi = fam.sample(np.random.default_rng(seed))
    H = fam(xi)
    for n in range(3):
        fr = eigensystem(fam, xi, n)
        V = fr.states
        assert np.max(np.abs(V.conj().T @ V - np.eye(3))) < 1e-10
        assert np.linalg.norm(H @ fr.state - fr.energy * fr.state) <= 1e-10 * np.linalg.norm(H, 2)
        assert np.all(np.diff(fr.energies) > 0)
        k = np.argmax(np.abs(fr.state))
        assert fr.state[k].real > 0 and abs(fr.state[k].imag) < 1e-15


def test_gauge_fix_identity_and_rotation(canon, rng):
    fr = eigensystem(canon, canon.sample(rng), 0)
    assert gauge_fix(fr, fr) is fr
    rotated = fr.with_state_phase(np.exp(0.7j))
    fixed = gauge_fix(rotated, fr)
    np.testing.assert_allclose(fixed.state, fr.state, atol=1e-15)
    np.testing.assert_array_equal(fixed.states[:, 1:], fr.states[:, 1:])


def test_gauge_fix_idempotent(canon, rng):
    a = eigensystem(canon, canon.sample(rng), 0)
    b = eigensystem(canon, a.point + 0.01, 0).with_state_phase(np.exp(2.1j))
    once = gauge_fix(b, a)
    twice = gauge_fix(once, a)
    np.testing.assert_array_equal(once.state, twice.state)


def test_gauge_fix_sweep_overlaps_real_positive(canon):
    xs = np.linspace(0.0, 1.0, 100)
    path = lambda s: np.array([0.3 + 2 * s, 0.2 - s, 0.4 + 0.3 * s, 0.1 * np.sin(3 * s)])  # noqa: E731
    prev = eigensystem(canon, path(0.0), 0)
    for s in xs[1:]:
        cur = gauge_fix(eigensystem(canon, path(s), 0), prev)
        ov = np.vdot(prev.state, cur.state)
        assert ov.real > 0 and abs(ov.imag) < 1e-14
        prev = cur


def test_gauge_fix_rejects_distant_frames():
    a = eigensystem(constant_family(SZ), [0.0], 0)
    b = eigensystem(constant_family(-SZ), [0.0], 0)
    with pytest.raises(FrameMismatch):
        gauge_fix(b, a)


def test_grad_linear_and_constant():
    fam = matrix_polynomial([((1,), SZ)], dim=2, nparams=1)
    np.testing.assert_array_equal(grad_H(fam, [0.4], 0), SZ)
    numeric = HamiltonianFamily(dim=2, nparams=1, eval=fam.eval)
    np.testing.assert_allclose(grad_H(numeric, [0.4], 0), SZ, atol=1e-12)
    np.testing.assert_array_equal(grad_H(constant_family(SX), [0.1], 0), 0)


def _richardson(f, x, mu, h=1e-2, levels=4):
    """Richardson table on the 2nd-order central difference."""
    def d(step):
        e = np.zeros_like(x)
        e[mu] = step
        return (f(x + e) - f(x - e)) / (2 * step)
    table = [d(h / 2 ** k) for k in range(levels)]
    for j in range(1, levels):
        table = [(4 ** j * table[k + 1] - table[k]) / (4 ** j - 1) for k in range(len(table) - 1)]
    return table[0]


def test_three_state_analytic_grad_matches_richardson(canon, rng):
    for _ in range(5):
        xi = canon.sample(rng)
        for mu in range(4):
            ref = _richardson(canon, xi, mu)
            assert np.max(np.abs(grad_H(canon, xi, mu) - ref)) < 1e-8


def test_grad_is_hermitian(canon, rng):
    xi = canon.sample(rng)
    for mu in range(4):
        G = grad_H(canon, xi, mu)
        assert np.max(np.abs(G - G.conj().T)) < 1e-12


def test_fd_step_underflow():
    numeric = HamiltonianFamily(dim=2, nparams=1, eval=lambda x: x[0] * SZ)
    with pytest.raises(StepUnderflow):
        grad_H(numeric, [0.5], 0, rel_step=1e-13)


def test_three_state_chart_poles():
    np.testing.assert_allclose(three_state([0.4, 1.1, 0.0, 0.0]), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(three_state(CanonicalState(0, 0, 1, 1)), [0, 1, 0], atol=1e-15)


def test_three_state_domain_errors():
    with pytest.raises(DomainError):
        three_state([0, 0, 1.2, 0.0])
    with pytest.raises(DomainError):
        three_state([0, 0, 0.3, 0.5])


def test_three_state_norm_on_random_points(rng):
    for _ in range(1000):
        p1 = rng.uniform(0, 1)
        c = CanonicalState(*rng.uniform(0, 2 * np.pi, 2), p1, rng.uniform(-p1, p1))
        assert abs(np.linalg.norm(three_state(c)) - 1.0) < 1e-14


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, np.pi / 2 - 0.01), st.floats(0.01, np.pi / 2 - 0.01),
       st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_angular_and_canonical_forms_agree(theta, beta, gamma, alpha):
    c = canonical_from_angles(theta, beta, gamma, alpha)
    assert np.max(np.abs(three_state(c) - three_state_angular(theta, beta, gamma, alpha))) < 1e-12


def test_model_ground_state_is_the_canonical_state(canon, rng):
    for _ in range(10):
        xi = canon.sample(rng)
        fr = eigensystem(canon, xi, 0)
        assert abs(abs(np.vdot(three_state(xi), fr.state)) - 1.0) < 1e-12
        assert fr.energy == pytest.approx(0.25 * xi[2], abs=1e-12)


def test_matrix_polynomial_eval_and_grad():
    fam = matrix_polynomial([((2, 1), SX), ((0, 0), SZ)], dim=2, nparams=2)
    x = np.array([0.3, -0.7])
    np.testing.assert_allclose(fam(x), 0.09 * -0.7 * SX + SZ)
    np.testing.assert_allclose(grad_H(fam, x, 0), 2 * 0.3 * -0.7 * SX)
    np.testing.assert_allclose(grad_H(fam, x, 1), 0.09 * SX)


def test_spin_field_gap(spin):
    fr = eigensystem(spin, [0.3, -0.4, 0.0], 0)
    assert fr.gap == pytest.approx(1.0)
    assert fr.energy == pytest.approx(-0.5)

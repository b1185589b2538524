import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeo import (SingularQGT, christoffel, compatibility_check, constant_family,
                  covariant_frame, curvature, imag_christoffel_identity, matrix_polynomial,
                  qgt, qgt_at, second_covariant, three_state_config_family,
                  three_state_two_level_slice)
from qgeo.closed_forms import (three_state_curvature, three_state_dkets, three_state_metric,
                               three_state_state, two_level_metric)
from qgeo.models import config_embedding, config_embedding_jacobian

from conftest import smooth_gauge

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def real_family():
    """Real-symmetric 3x3 family in two parameters."""
    A = np.array([[0.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 2.0]])
    B = np.array([[0.5, 0.0, 0.4], [0.0, -0.2, 0.3], [0.4, 0.3, 0.1]])
    C = np.array([[0.0, 0.6, 0.0], [0.6, 0.0, -0.1], [0.0, -0.1, 0.0]])
    return matrix_polynomial([((0, 0), A), ((1, 0), B), ((0, 1), C), ((1, 1), 0.3 * B)],
                             dim=3, nparams=2, domain=[(-0.5, 0.5)] * 2)


def test_constant_family_has_no_geometry():
    fam = constant_family(np.diag([0.0, 1.0, 3.0]), nparams=2)
    tf = covariant_frame(fam, [0.1, 0.2])
    np.testing.assert_array_equal(tf.dkets, 0)
    np.testing.assert_array_equal(second_covariant(fam, [0.1, 0.2], 0, 0, 1), 0)
    assert np.all(qgt(tf).h == 0)


def test_tangent_frame_orthogonal_to_state(config, rng):
    tf = covariant_frame(config, config.sample(rng))
    assert np.max(np.abs(tf.dkets @ tf.frame.state.conj())) < 1e-10
    assert np.isrealobj(tf.berry_conn)


def test_bloch_theta_metric(bloch, rng):
    for _ in range(5):
        h = qgt_at(bloch, bloch.sample(rng)).h
        assert h[0, 0].real == pytest.approx(0.25, abs=1e-12)


def test_three_state_dkets_match_closed_form(canon, rng):
    for _ in range(10):
        xi = canon.sample(rng)
        tf = covariant_frame(canon, xi)
        # the covariant kets carry the same phase as the state
        phase = np.vdot(three_state_state(*xi), tf.frame.state)
        assert abs(abs(phase) - 1) < 1e-12
        assert np.max(np.abs(tf.dkets - phase * three_state_dkets(*xi))) < 1e-8


def test_two_level_metric(qp, rng):
    for _ in range(20):
        x = qp.sample(rng)
        assert np.max(np.abs(qgt_at(qp, x).g - two_level_metric(x[1]))) < 1e-8


def test_three_state_closed_forms(canon, rng):
    for _ in range(20):
        xi = canon.sample(rng)
        q = qgt_at(canon, xi)
        assert np.max(np.abs(q.g - three_state_metric(xi[2], xi[3]))) < 1e-8
        assert np.max(np.abs(q.B - three_state_curvature())) < 1e-10


def test_two_level_reduction(rng):
    fam = three_state_two_level_slice()
    for _ in range(10):
        y = fam.sample(rng)
        assert np.max(np.abs(qgt_at(fam, y).g - two_level_metric(y[1]))) < 1e-8
        # the same block of the closed-form 4x4 metric, transformed by the chart
        J = np.array([[0.5, 0.0], [0.0, 2.0]])
        block = three_state_metric(1.0 - 1e-12, 2 * y[1] - 1)[np.ix_([1, 3], [1, 3])]
        assert np.max(np.abs(J.T @ block @ J - two_level_metric(y[1]))) < 1e-8


def test_pullback_to_configuration_coordinates(canon, config, rng):
    for _ in range(5):
        x = config.sample(rng)
        J = config_embedding_jacobian(x)
        ref = qgt_at(canon, config_embedding(x)).h
        assert np.max(np.abs(qgt_at(config, x).h - J.T @ ref @ J)) < 1e-10


def test_real_family_has_no_curvature_or_imaginary_symbols(rng):
    fam = real_family()
    x = fam.sample(rng)
    q = qgt_at(fam, x)
    assert np.max(np.abs(q.B)) < 1e-14
    ch = christoffel(fam, x, raise_index=False)
    assert np.max(np.abs(ch.c)) < 1e-10
    assert compatibility_check(fam, x)["imag_identity"] < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_qgt_type_invariants(seed):
    fam = three_state_config_family()
    q = qgt_at(fam, fam.sample(np.random.default_rng(seed)))
    assert np.max(np.abs(q.h - q.h.conj().T)) < 1e-10
    np.testing.assert_array_equal(q.g, q.g.T)
    np.testing.assert_array_equal(q.B, -q.B.T)
    assert np.min(np.linalg.eigvalsh(q.g)) > -1e-10


def test_christoffel_symmetry_and_normal_component(canon, rng):
    for _ in range(20):
        r = compatibility_check(canon, canon.sample(rng))
        assert r["symmetry"] < 1e-7
        assert r["normal_component"] < 1e-8


def test_compatibility_identities(canon, config, rng):
    for fam in (canon, config):
        for _ in range(5):
            r = compatibility_check(fam, fam.sample(rng))
            assert r["compatibility"] < 1e-6
            assert r["real_identity"] < 1e-6
            assert r["imag_identity"] < 1e-6


def test_two_level_compatibility(qp, rng):
    for _ in range(5):
        assert compatibility_check(qp, qp.sample(rng))["compatibility"] < 1e-7


def test_imaginary_part_from_ordinary_derivatives(canon, config, rng):
    for fam in (canon, config):
        for _ in range(3):
            x = fam.sample(rng)
            C = imag_christoffel_identity(fam, x)
            ch = christoffel(fam, x, raise_index=False)
            assert np.max(np.abs(C - ch.c)) < 1e-6


def test_index_raising_round_trip(config, rng):
    x = config.sample(rng)
    ch = christoffel(config, x)
    lowered = np.einsum("kr,rmn->kmn", ch.qgt.h, ch.second)
    assert np.max(np.abs(lowered - ch.first)) < 1e-8
    assert ch.h_cond < 1e3


def test_rank_deficient_qgt_refuses_second_kind(canon, rng):
    xi = canon.sample(rng)
    with pytest.raises(SingularQGT):
        christoffel(canon, xi)
    ch = christoffel(canon, xi, raise_index=False)
    assert ch.second is None and ch.h_cond > 1e10


def test_chart_singularity_is_reported(qp):
    with pytest.raises(SingularQGT):
        christoffel(qp, [0.3, 1e-4])


def test_curvature_symmetries(config, rng):
    for _ in range(2):
        res = curvature(config, config.sample(rng)).residuals()
        assert res["antisymmetry"] < 1e-5
        assert res["anti_hermiticity"] < 1e-5
        assert res["max_abs"] > 1e-3


def test_one_parameter_manifold_is_flat():
    fam = matrix_polynomial([((0,), np.diag([0.0, 1.0, 2.0]).astype(complex)),
                             ((1,), np.array([[0, 1, 0], [1, 0, 1j], [0, -1j, 0]]))],
                            dim=3, nparams=1)
    R = curvature(fam, [0.3])
    np.testing.assert_array_equal(R.mixed, 0)


def test_backends_agree(canon, config, qp, bloch, spin, rng):
    for fam in (canon, config, qp, bloch, spin):
        x = fam.sample(rng)
        a = covariant_frame(fam, x, backend="sos").dkets
        b = covariant_frame(fam, x, backend="fd").dkets
        assert np.max(np.abs(a - b)) < 1e-6, fam.name


def test_gauge_invariance_of_geometry(config, rng):
    gauged = config.with_gauge(smooth_gauge(7))
    for _ in range(3):
        x = config.sample(rng)
        a, b = christoffel(config, x), christoffel(gauged, x)
        assert np.max(np.abs(a.qgt.h - b.qgt.h)) < 1e-8
        assert np.max(np.abs(a.first - b.first)) < 1e-8
        assert np.max(np.abs(a.second - b.second)) < 1e-8
    x = config.sample(rng)
    Ra, Rb = curvature(config, x), curvature(gauged, x)
    assert np.max(np.abs(Ra.covariant - Rb.covariant)) < 1e-8


def test_berry_connection_shifts_by_gauge_gradient(canon, rng):
    f = smooth_gauge(3)
    xi = canon.sample(rng)
    A0 = covariant_frame(canon, xi).berry_conn
    A1 = covariant_frame(canon.with_gauge(f), xi).berry_conn
    eps = 1e-6
    grad = np.array([(f(xi + eps * e) - f(xi - eps * e)) / (2 * eps) for e in np.eye(4)])
    assert np.max(np.abs(A1 - (A0 - grad))) < 1e-8

import numpy as np
import pytest
from scipy.linalg import expm

from qgeo import (ConfigError, DegenerateLevel, ParamPath, christoffel, curvature,
                  eigensystem, geometric_phase, holonomy, qgt_at)
from qgeo.transport import transport

from conftest import equator_loop, smooth_gauge


def random_loop(rng, centre=(1.0, 2.0), size=0.3):
    return ParamPath.fourier_loop(centre, rng.normal(scale=size / 2, size=(2, 2, 2)))


def test_constant_path_leaves_ket_unchanged(config):
    v0 = np.array([0.3 + 0.1j, -0.7])
    res = transport(config, ParamPath.constant([1.0, 2.0], closed=False), 0, v0)
    np.testing.assert_array_equal(res.final.v, v0)
    assert res.trajectory.shape == (21, 2)


def test_zero_length_loop_has_trivial_holonomy(config):
    H = holonomy(config, ParamPath.constant([1.0, 2.0]), 0)
    np.testing.assert_array_equal(H.G, np.eye(2))


def test_holonomy_needs_closed_loop(config, apt_path):
    with pytest.raises(ConfigError):
        holonomy(config, apt_path, 0)


def test_compatibility_along_open_path(config, apt_path, rng):
    u0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    v0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    u1 = transport(config, apt_path, 0, u0).final.v
    v1 = transport(config, apt_path, 0, v0).final.v
    h0, h1 = qgt_at(config, apt_path(0.0)).h, qgt_at(config, apt_path(1.0)).h
    assert abs(np.vdot(u1, h1 @ v1) - np.vdot(u0, h0 @ v0)) < 1e-8 * np.linalg.norm(u0) * \
        np.linalg.norm(v0)


def magnus_product(family, loop, steps=256):
    """Fixed-step product of fourth-order Magnus exponentials."""
    G = np.eye(family.nparams, dtype=complex)
    nodes = 0.5 + np.array([-1, 1]) * np.sqrt(3) / 6
    for k in range(steps):
        a, h = k / steps, 1.0 / steps
        A1, A2 = (np.einsum("kmn,m->kn", christoffel(family, loop(a + c * h)).second,
                            loop.velocity(a + c * h)) for c in nodes)
        omega = -0.5 * h * (A1 + A2) + np.sqrt(3) / 12 * h * h * (A2 @ A1 - A1 @ A2)
        G = expm(omega) @ G
    return G


@pytest.mark.slow
def test_holonomy_matches_product_of_exponentials(config, loop):
    H = holonomy(config, loop, 0)
    assert np.max(np.abs(H.G - magnus_product(config, loop))) < 1e-7


def test_holonomy_unitarity_and_columns(config, rng):
    lp = random_loop(rng)
    H = holonomy(config, lp, 0)
    assert H.unitarity_residual() < 1e-7
    for j in range(2):
        col = transport(config, lp, 0, np.eye(2)[j]).final.v
        assert np.max(np.abs(col - H.G[:, j])) < 1e-8


def test_loop_then_reversal_is_identity(config, loop):
    G = holonomy(config, loop, 0).G
    G_rev = holonomy(config, loop.reversed(), 0).G
    assert np.max(np.abs(G_rev @ G - np.eye(2))) < 1e-8


def test_reparametrization_invariance(config, apt_path):
    sigma = lambda s: s + 0.1 * np.sin(2 * np.pi * s) / (2 * np.pi)  # noqa: E731
    dsigma = lambda s: 1 + 0.1 * np.cos(2 * np.pi * s)  # noqa: E731
    v0 = np.array([1.0, 0.5j])
    a = transport(config, apt_path, 0, v0).final.v
    b = transport(config, apt_path.reparametrized(sigma, dsigma), 0, v0).final.v
    assert np.max(np.abs(a - b)) < 1e-8


def test_small_loop_matches_curvature(config):
    x0 = np.array([1.0, 2.0])
    R = curvature(config, x0).mixed
    v0 = np.array([1.0, -0.4 + 0.3j])
    ratios = []
    for eps in (0.04, 0.02):
        lp = ParamPath.ellipse(x0, [eps, 0.0], [0.0, eps])
        dv = transport(config, lp, 0, v0).final.v - v0
        # oint x^l dx^m of the circle, antisymmetric with S[0, 1] = pi eps^2
        S = np.pi * eps ** 2 * np.array([[0, 1], [-1, 0]])
        predicted = -0.5 * np.einsum("knlm,n,lm->k", R, v0, S)
        ratios.append(np.linalg.norm(dv - predicted) / np.linalg.norm(predicted))
        assert np.linalg.norm(dv) == pytest.approx(np.linalg.norm(predicted), rel=0.1)
    # remainder is O(eps^3) against an O(eps^2) leading term
    assert ratios[1] < 0.6 * ratios[0]


def test_geometric_phase_constant_loop(spin):
    gp = geometric_phase(spin, ParamPath.constant([0.2, 0.3, 0.4]))
    assert gp.gamma == 0.0 and gp.winding == 0


def pancharatnam_phase(family, loop, nodes=100_000):
    """-arg prod <n_k|n_k+1> on a dense grid: trapezoid rule for oint A."""
    s = np.linspace(0.0, 1.0, nodes + 1)
    states = np.array([eigensystem(family, loop(si), 0).state for si in s])
    states[-1] = states[0]
    ov = np.einsum("ij,ij->i", states[:-1].conj(), states[1:])
    return -float(np.sum(np.angle(ov)))


@pytest.mark.slow
def test_equator_phase_against_dense_quadrature(spin):
    lp = equator_loop()
    gp = geometric_phase(spin, lp)
    assert abs(abs(gp.gamma) - np.pi) < 1e-10
    ref = pancharatnam_phase(spin, lp)
    assert abs(np.angle(np.exp(1j * (gp.gamma - ref)))) < 1e-8


def test_cap_phase_is_half_solid_angle(spin):
    theta = np.pi / 3
    gp = geometric_phase(spin, equator_loop(z=np.cos(theta)))
    solid = 2 * np.pi * (1 - np.cos(theta))
    assert gp.gamma == pytest.approx(-0.5 * solid, abs=1e-10)
    assert gp.total == pytest.approx(gp.gamma + 2 * np.pi * gp.winding, abs=1e-12)


def test_closed_loop_phase_is_gauge_invariant(config, loop):
    a = geometric_phase(config, loop)
    b = geometric_phase(config.with_gauge(smooth_gauge(11)), loop)
    assert abs(np.angle(np.exp(1j * (a.gamma - b.gamma)))) < 1e-8


def test_degenerate_point_on_loop(spin):
    lp = ParamPath.ellipse([0.3, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, 0.0, 0.3])
    with pytest.raises(DegenerateLevel):
        geometric_phase(spin, lp)

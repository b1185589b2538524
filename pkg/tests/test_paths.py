import numpy as np
import pytest
import sympy as sp

from qgeo import ConfigError, ParamPath
from qgeo.paths import _S, RAMP, ramp, ramp_derivative


def test_ramp_endpoints_and_derivative():
    assert ramp(0.0) == 0.0 and ramp(1.0) == pytest.approx(1.0)
    sym = sp.Symbol("s")
    exact = sp.lambdify(sym, sp.diff(RAMP.subs(_S, sym), sym))
    s = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(ramp_derivative(s), exact(s), atol=1e-12)
    for k in (1, 2, 3):
        d = sp.diff(RAMP, _S, k)
        assert d.subs(_S, 0) == 0 and d.subs(_S, 1) == 0


def test_closed_flag_is_validated():
    with pytest.raises(ConfigError):
        ParamPath.from_exprs(["s", "0"], closed=True)
    loop = ParamPath.ellipse([0, 0], [1, 0], [0, 1])
    np.testing.assert_allclose(loop(0.0), loop(1.0), atol=1e-12)


def test_expression_velocity_is_analytic():
    p = ParamPath.from_exprs(["sin(pi*s)", "ramp(s)**2"])
    s = 0.3
    np.testing.assert_allclose(p.velocity(s), [np.pi * np.cos(np.pi * s),
                                               2 * ramp(s) * ramp_derivative(s)], rtol=1e-12)


def test_unknown_symbol_rejected():
    with pytest.raises(ConfigError):
        ParamPath.from_exprs(["a*s"])
    with pytest.raises(ConfigError):
        ParamPath.from_exprs(["s +"])


def test_fd_velocity_fallback():
    p = ParamPath(lambda s: np.array([np.sin(s), s ** 3]))
    np.testing.assert_allclose(p.velocity(0.4), [np.cos(0.4), 3 * 0.16], rtol=1e-10)


def test_polyline_interpolates_samples():
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [1.5, 1.5], [1.0, 2.0]])
    p = ParamPath.polyline(pts)
    for s, x in zip(np.linspace(0, 1, 4), pts):
        np.testing.assert_allclose(p(s), x, atol=1e-14)
    loop = ParamPath.polyline(pts, closed=True)
    assert loop.closed
    np.testing.assert_allclose(loop.velocity(0.0), loop.velocity(1.0), atol=1e-12)


def test_reversed_and_reparametrized():
    p = ParamPath.fourier_loop([0.0, 1.0], [[[0.2, 0.1], [0.0, 0.3]]])
    r = p.reversed()
    np.testing.assert_allclose(r(0.2), p(0.8))
    np.testing.assert_allclose(r.velocity(0.2), -p.velocity(0.8))
    q = p.reparametrized(lambda s: s * s, lambda s: 2 * s)
    np.testing.assert_allclose(q.velocity(0.5), p.velocity(0.25))


def test_from_config_schema():
    p = ParamPath.from_config({"kind": "expr", "exprs": ["s", "2*s"]})
    np.testing.assert_allclose(p(0.5), [0.5, 1.0])
    p = ParamPath.from_config({"kind": "polyline", "samples": [[0, 0], [1, 1]]})
    np.testing.assert_allclose(p(0.25), [0.25, 0.25])
    for bad in ({"kind": "spline"}, {"kind": "expr"}, {"kind": "polyline"}, []):
        with pytest.raises(ConfigError):
            ParamPath.from_config(bad)

"""Parameter-space paths s -> x(s), s in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from scipy.interpolate import CubicSpline

from .errors import ConfigError

_VEL_STEP = 1e-4
_S = sp.Symbol("s")
# C^3 ramp from 0 to 1 with vanishing first three derivatives at both ends
RAMP = _S ** 4 * (35 - 84 * _S + 70 * _S ** 2 - 20 * _S ** 3)


def ramp(s):
    return s ** 4 * (35 - 84 * s + 70 * s ** 2 - 20 * s ** 3)


def ramp_derivative(s):
    return 140 * s ** 3 * (1 - s) ** 3


@dataclass(frozen=True)
class ParamPath:
    """A C^1 path in parameter space.

    ``func(s)`` returns the point, ``vel(s)`` (optional) its derivative
    d x / d s; without it a fourth-order central difference is used.
    Paths are evaluated slightly outside [0, 1] by finite-difference
    stencils, so ``func`` should extend smoothly past the ends.
    """

    func: Callable[[float], np.ndarray]
    vel: Optional[Callable[[float], np.ndarray]] = None
    closed: bool = False
    description: str = ""

    def __post_init__(self):
        if self.closed:
            a, b = self(0.0), self(1.0)
            if np.max(np.abs(a - b)) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
                raise ConfigError("closed path does not return to its start point")

    def __call__(self, s):
        return np.asarray(self.func(float(s)), dtype=float)

    @property
    def nparams(self):
        return self(0.0).size

    def velocity(self, s):
        s = float(s)
        if self.vel is not None:
            return np.asarray(self.vel(s), dtype=float)
        h = _VEL_STEP
        return (self(s - 2 * h) - 8 * self(s - h) + 8 * self(s + h) - self(s + 2 * h)) / (12 * h)

    def reversed(self):
        vel = None if self.vel is None else (lambda s: -self.velocity(1.0 - s))
        return ParamPath(lambda s: self(1.0 - s), vel, self.closed, f"reversed({self.description})")

    def reparametrized(self, sigma, dsigma):
        """Path s -> x(sigma(s)) for monotone sigma with sigma(0)=0, sigma(1)=1."""
        return ParamPath(lambda s: self(sigma(s)),
                         lambda s: dsigma(s) * self.velocity(sigma(s)),
                         self.closed, f"reparametrized({self.description})")

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, x0, closed=True):
        x0 = np.asarray(x0, dtype=float)
        zero = np.zeros_like(x0)
        return cls(lambda s: x0, lambda s: zero, closed, "constant")

    @classmethod
    def line(cls, a, b):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        return cls(lambda s: a + s * (b - a), lambda s: b - a, False, "line")

    @classmethod
    def ramped_line(cls, a, b):
        """Straight line traversed with the C^3 ramp (starts and stops at rest)."""
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        return cls(lambda s: a + ramp(s) * (b - a),
                   lambda s: ramp_derivative(s) * (b - a), False, "ramped_line")

    @classmethod
    def ellipse(cls, center, u, v):
        """Closed loop center + u cos(2 pi s) + v sin(2 pi s)."""
        c, u, v = (np.asarray(w, dtype=float) for w in (center, u, v))
        w = 2 * np.pi
        return cls(lambda s: c + u * np.cos(w * s) + v * np.sin(w * s),
                   lambda s: w * (-u * np.sin(w * s) + v * np.cos(w * s)),
                   True, "ellipse")

    @classmethod
    def fourier_loop(cls, center, coeffs):
        """Closed loop c + sum_k a_k cos(2 pi k s) + b_k sin(2 pi k s).

        ``coeffs`` has shape (K, 2, n): coeffs[k-1] = (a_k, b_k).
        """
        c = np.asarray(center, dtype=float)
        co = np.asarray(coeffs, dtype=float)
        k = 2 * np.pi * np.arange(1, co.shape[0] + 1)

        def f(s):
            return c + np.cos(k * s) @ co[:, 0] + np.sin(k * s) @ co[:, 1]

        def df(s):
            return (-k * np.sin(k * s)) @ co[:, 0] + (k * np.cos(k * s)) @ co[:, 1]

        return cls(f, df, True, "fourier_loop")

    @classmethod
    def polyline(cls, samples, closed=False):
        """Cubic-spline interpolant through equally spaced samples in s."""
        pts = np.asarray(samples, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ConfigError("polyline needs at least two samples of equal dimension")
        if closed and np.max(np.abs(pts[0] - pts[-1])) > 1e-12:
            pts = np.vstack([pts, pts[:1]])
        s = np.linspace(0.0, 1.0, pts.shape[0])
        if pts.shape[0] == 2:
            return cls.constant(pts[0]) if closed else cls.line(pts[0], pts[1])
        spline = CubicSpline(s, pts, axis=0, bc_type="periodic" if closed else "not-a-knot")
        dspline = spline.derivative()
        return cls(spline, dspline, closed, "polyline")

    @classmethod
    def from_exprs(cls, exprs, closed=False):
        """Path from component expressions in ``s`` (sympy syntax).

        ``ramp(s)`` is available as the C^3 smootherstep.
        """
        local = {"s": _S, "ramp": sp.Lambda(_S, RAMP), "pi": sp.pi}
        try:
            comps = [sp.sympify(e, locals=local) for e in exprs]
        except (sp.SympifyError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"cannot parse path expression: {exc}") from exc
        extra = set().union(*(c.free_symbols for c in comps)) - {_S}
        if extra:
            raise ConfigError(f"path expressions use unknown symbols {sorted(map(str, extra))}")
        f = sp.lambdify(_S, comps, "numpy")
        df = sp.lambdify(_S, [sp.diff(c, _S) for c in comps], "numpy")
        return cls(lambda s: np.array(f(s), dtype=float),
                   lambda s: np.array(df(s), dtype=float), closed,
                   "exprs:" + ";".join(map(str, exprs)))

    @classmethod
    def from_config(cls, cfg):
        """Build from the path-file schema
        ``{"kind": "polyline"|"expr", "samples"|"exprs": ..., "closed": bool}``."""
        if not isinstance(cfg, dict):
            raise ConfigError("path configuration must be a JSON object")
        kind = cfg.get("kind")
        closed = bool(cfg.get("closed", False))
        if kind == "polyline":
            if "samples" not in cfg:
                raise ConfigError("polyline path needs 'samples'")
            return cls.polyline(cfg["samples"], closed)
        if kind == "expr":
            exprs = cfg.get("exprs")
            if not isinstance(exprs, Sequence) or isinstance(exprs, str) or not exprs:
                raise ConfigError("expr path needs a non-empty list 'exprs'")
            return cls.from_exprs(list(exprs), closed)
        raise ConfigError(f"unknown path kind {kind!r}")

"""Parallel transport of tangent kets, holonomy and the Berry phase."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import ConfigError, DegenerateLevel, StepFailure
from .geometry import COND_MAX, christoffel
from .models import eigensystem, grad_all
from .paths import ParamPath

TOL_ODE = 1e-10
# local reference gauges are accepted while |<ref|n>| stays above this
_MIN_OVERLAP = 0.7
_MAX_SPLIT_DEPTH = 20


@dataclass(frozen=True)
class TangentKetComponents:
    """Components v^l of |v> = v^l |D_l n> at path parameter ``s``."""

    v: np.ndarray
    s: float

    def ket(self, dkets):
        return self.v @ dkets


@dataclass(frozen=True)
class TransportResult:
    final: TangentKetComponents
    s: np.ndarray
    trajectory: np.ndarray  # (len(s), n)
    nfev: int


@dataclass(frozen=True)
class Holonomy:
    G: np.ndarray
    loop: ParamPath
    h0: np.ndarray

    def unitarity_residual(self):
        """max |G^+ h G - h| relative to max |h|."""
        G, h = self.G, self.h0
        return float(np.max(np.abs(G.conj().T @ h @ G - h)) / max(np.max(np.abs(h)), 1e-300))


@dataclass(frozen=True)
class GeometricPhase:
    gamma: float         # wrapped into (-pi, pi]
    winding: int         # total = gamma + 2 pi winding
    total: float         # continuous accumulation along the path
    segments: int = field(default=0)


class _ConnectionCache:
    """Per-solve memo of the connection matrices Y^k_{m n} along a path."""

    def __init__(self, family, path, n, cond_max, geom_kw):
        self.family, self.path, self.n = family, path, n
        self.cond_max, self.kw = cond_max, geom_kw
        self.memo = {}

    def upsilon(self, s):
        s = float(s)
        hit = self.memo.get(s)
        if hit is None:
            hit = christoffel(self.family, self.path(s), self.n,
                              cond_max=self.cond_max, **self.kw)
            self.memo[s] = hit
        return hit

    def generator(self, s):
        """Matrix A^k_n = Y^k_{m n} dx^m/ds."""
        ups = self.upsilon(s).second
        return np.einsum("kmn,m->kn", ups, self.path.velocity(s))


def _solve(rhs, y0, tol, s_eval):
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    t_eval=s_eval)
    if not sol.success:
        raise StepFailure(f"transport integrator failed: {sol.message}")
    return sol


def transport(family, path, n, v0, *, tol=TOL_ODE, s_eval=None, cond_max=COND_MAX,
              **geom_kw):
    """Parallel transport of tangent-ket components along ``path``.

    Solves dv^l/ds = -Y^l_{m n}(dx^m/ds) v^n from s=0 to s=1.

    Parameters
    ----------
    v0 : TangentKetComponents or array_like
        Initial components in the frame {|D_l n>} at x(0).
    s_eval : array_like, optional
        Path parameters at which the trajectory is sampled (default 0..1
        in 21 steps).
    """
    v0 = np.asarray(v0.v if isinstance(v0, TangentKetComponents) else v0, dtype=complex)
    if v0.shape != (family.nparams,):
        raise ConfigError(f"initial ket needs {family.nparams} components, got {v0.shape}")
    cache = _ConnectionCache(family, path, n, cond_max, geom_kw)
    s_eval = np.linspace(0.0, 1.0, 21) if s_eval is None else np.asarray(s_eval, float)

    def rhs(s, v):
        return -cache.generator(s) @ v

    sol = _solve(rhs, v0, tol, s_eval)
    traj = sol.y.T.copy()
    final = _solve(rhs, v0, tol, [1.0]).y[:, -1] if s_eval[-1] != 1.0 else traj[-1]
    return TransportResult(final=TangentKetComponents(final, 1.0), s=s_eval,
                           trajectory=traj, nfev=sol.nfev)


def holonomy(family, loop, n, *, tol=TOL_ODE, cond_max=COND_MAX, **geom_kw):
    """Holonomy of a closed loop: the fundamental solution of
    dG/ds = -A(s) G, G(0) = I, in the frame at the basepoint x(0)."""
    if not loop.closed:
        raise ConfigError("holonomy requires a closed loop")
    cache = _ConnectionCache(family, loop, n, cond_max, geom_kw)
    npar = family.nparams

    def rhs(s, y):
        return (-cache.generator(s) @ y.reshape(npar, npar)).ravel()

    sol = _solve(rhs, np.eye(npar, dtype=complex).ravel(), tol, [1.0])
    h0 = cache.upsilon(0.0).qgt.h
    return Holonomy(G=sol.y[:, -1].reshape(npar, npar), loop=loop, h0=h0)


# -- Berry phase -----------------------------------------------------------


def _aligned(state, ref):
    ov = np.vdot(ref, state)
    return state * (ov.conjugate() / abs(ov)), abs(ov)


def _local_connection(family, path, n, ref, s, gap_tol):
    """A_mu dx^mu/ds in the gauge <ref|n> > 0 (analytic, no stencil)."""
    x = path(s)
    frame = eigensystem(family, x, n, gap_tol=gap_tol)
    nloc, mag = _aligned(frame.state, ref)
    dH = np.tensordot(path.velocity(s), grad_all(family, x), axes=1)
    t = frame.resolvent(1) @ (dH @ nloc)
    return float(np.vdot(ref, t).imag / mag)


def _state(family, path, n, s, gap_tol):
    return eigensystem(family, path(s), n, gap_tol=gap_tol).state


def _segments(family, path, n, knots, gap_tol):
    """Refine ``knots`` until every interval admits one local reference gauge.

    Returns a list of (a, b, ref) with consecutive references phase-aligned.
    """
    out = []
    prev_ref = None
    stack = [(a, b, 0) for a, b in zip(knots[:-1], knots[1:])][::-1]
    while stack:
        a, b, depth = stack.pop()
        ref = _state(family, path, n, 0.5 * (a + b), gap_tol)
        na, nb = _state(family, path, n, a, gap_tol), _state(family, path, n, b, gap_tol)
        if min(abs(np.vdot(ref, na)), abs(np.vdot(ref, nb))) < _MIN_OVERLAP:
            if depth >= _MAX_SPLIT_DEPTH:
                raise DegenerateLevel(f"eigenvector changes too fast near s={a:.6g}")
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
            continue
        if prev_ref is not None:
            ref, _ = _aligned(ref, prev_ref)
        out.append((a, b, ref))
        prev_ref = ref
    return out


def _integrate_segments(family, path, n, segs, gap_tol, epsabs):
    """Parallel-transported state at every segment end and the accumulated
    phase relative to the first local gauge."""
    phases = []
    for a, b, ref in segs:
        val, _ = quad(lambda s: _local_connection(family, path, n, ref, s, gap_tol),
                      a, b, epsabs=epsabs, epsrel=1e-12, limit=200)
        phases.append(val)
    return np.array(phases)


def parallel_transport_states(family, path, n, s_values, *, gap_tol=None, epsabs=1e-13):
    """The parallel-transported eigenstate n_pt(s) at the given ``s_values``.

    n_pt(0) equals the frame state at x(0) (including any family gauge) and
    <n_pt|d_s n_pt> = 0 along the path. Also returns the geometric phase
    gamma(s) defined by n_pt(s) = exp(i gamma(s)) n(s), unwrapped along
    the samples, with gamma(0) = 0.
    """
    s_values = np.asarray(s_values, dtype=float)
    if s_values.ndim != 1 or s_values.size == 0 or np.any(np.diff(s_values) < 0):
        raise ConfigError("s_values must be a non-empty increasing sequence")
    knots = np.unique(np.concatenate([[0.0], s_values]))
    if knots.size == 1:
        knots = np.array([0.0, 0.0])
    states = {}
    n0 = _state(family, path, n, 0.0, gap_tol)
    states[0.0] = n0
    if knots[-1] > 0.0:
        segs = _segments(family, path, n, knots, gap_tol)
        phases = _integrate_segments(family, path, n, segs, gap_tol, epsabs)
        psi = n0
        for (a, b, ref), ph in zip(segs, phases):
            nloc_a, _ = _aligned(_state(family, path, n, a, gap_tol), ref)
            c = np.vdot(nloc_a, psi)
            c /= abs(c)
            # A = i<n|dn> in the local gauge, so n_pt = exp(i int A) n_loc
            nloc_b, _ = _aligned(_state(family, path, n, b, gap_tol), ref)
            psi = c * np.exp(1j * ph) * nloc_b
            states[float(b)] = psi
    out = np.array([states[float(s)] for s in s_values])
    frames = np.array([_state(family, path, n, s, gap_tol) for s in s_values])
    gam = np.angle(np.einsum("ij,ij->i", frames.conj(), out))
    return out, np.unwrap(gam)


def geometric_phase(family, path, n=0, *, gap_tol=None, knots=16, epsabs=1e-13):
    """Berry phase gamma = oint A_mu dx^mu of a closed path.

    The sign follows n_pt(1) = exp(i gamma) n(0) for the parallel-
    transported state, with A_mu = i<n|d_mu n>. ``gamma`` is wrapped into
    (-pi, pi]; ``total`` keeps the continuous accumulation.
    """
    if not path.closed:
        raise ConfigError("geometric phase requires a closed path")
    segs = _segments(family, path, n, np.linspace(0.0, 1.0, knots + 1), gap_tol)
    phases = _integrate_segments(family, path, n, segs, gap_tol, epsabs)
    total = float(np.sum(phases))
    # junction phases between consecutive local gauges, including closure
    for (a0, b0, r0), (a1, b1, r1) in zip(segs, segs[1:] + segs[:1]):
        nb = _state(family, path, n, b0 if b0 < 1.0 else 0.0, gap_tol)
        left, _ = _aligned(nb, r0)
        right, _ = _aligned(nb, r1)
        total += float(np.angle(np.vdot(right, left)))
    gamma = float(np.pi - (np.pi - total) % (2 * np.pi))
    winding = int(round((total - gamma) / (2 * np.pi)))
    return GeometricPhase(gamma=gamma, winding=winding, total=total, segments=len(segs))

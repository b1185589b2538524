"""Gauge- and coordinate-invariant adiabatic perturbation theory.

Everything is computed in path units first: with s = t / T the tangent
ket, the correction kets and the phase rates scale with fixed powers of
1/T, so one expansion serves every total time T and every hbar,

    hbar^k |n_k>(t)      = lam^k |n_k^s>(s),      lam = hbar / T,
    phi(t) / hbar         = (T / hbar) phi_s(s),   phi_s = -int_0^s E_n ds',
    hbar^k alpha_k(t)     = lam^k alpha_k^s(s).

Local quantities at a path point come from a jet of eigenframes on a
uniform s-grid around it, all rephased so that <n(s)|n(s_j)> > 0. Time
derivatives are central differences on that grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import quad, quad_vec

from . import _fd
from .errors import ConfigError, FrameMismatch, NotOrthogonal, StencilFailure
from .geometry import covariant_frame
from .models import eigensystem, gauge_fix, grad_all
from .transport import parallel_transport_states

JET_STEP = 5e-3
JET_ORDER = 6
P_MAX = 6
ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class DrivenSystem:
    """A Hamiltonian family driven along ``path`` in total time ``T``.

    The physical time is t = s T; eps = hbar / (delta T).
    """

    family: object
    path: object
    T: float
    hbar: float = 1.0
    level: int = 0
    gap_tol: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"total time must be positive, got {self.T}")
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ConfigError(f"hbar must be positive, got {self.hbar}")
        if self.path.nparams != self.family.nparams:
            raise ConfigError(f"path has {self.path.nparams} components, family "
                              f"expects {self.family.nparams}")

    @property
    def eps(self):
        return self.hbar / (self.family.delta * self.T)

    @property
    def lam(self):
        return self.hbar / self.T

    def with_T(self, T):
        return DrivenSystem(self.family, self.path, T, self.hbar, self.level, self.gap_tol)


@dataclass(frozen=True)
class APTOrderData:
    """Order-k data at one path point, in physical units."""

    order: int
    ket: np.ndarray
    beta: float
    beta_dot: float
    alpha_dot: float
    alpha: Optional[float] = None


@dataclass(frozen=True)
class ResponseTensors:
    mass2: np.ndarray
    energy3: float
    en3_terms: tuple
    energy: float


# -- local jet ------------------------------------------------------------


def _crop(a, r):
    """Central 2r+1 entries of a jet array."""
    c = a.shape[0] // 2
    return a[c - r: c + r + 1]


def _apply(ops, kets):
    return np.einsum("jab,jb->ja", ops, kets)


def _braket(bras, kets):
    return np.einsum("ja,ja->j", bras.conj(), kets)


class Jet:
    """Eigenframes at s + j h, j = -K..K, in the gauge of the centre frame.

    All rates are per unit s.
    """

    def __init__(self, family, path, level, s, radius, step=JET_STEP,
                 fd_order=JET_ORDER, gap_tol=None):
        self.step, self.fd_order = step, fd_order
        self.m = int(_fd.stencil(fd_order)[0].max())
        self.radius = radius
        self.s = float(s)
        centre = eigensystem(family, path(s), level, gap_tol=gap_tol)
        self.centre = centre
        frames = []
        for j in range(-radius, radius + 1):
            if j == 0:
                frames.append(centre)
                continue
            fr = eigensystem(family, path(s + j * step), level, gap_tol=gap_tol)
            try:
                frames.append(gauge_fix(fr, centre))
            except FrameMismatch as exc:
                raise StencilFailure(f"jet step {step} too large at s={s}: {exc}") from exc
        self.frames = frames
        self.states = np.array([f.state for f in frames])
        self.energies = np.array([f.energy for f in frames])
        self.R = np.array([f.resolvent(1) for f in frames])
        dH = []
        for j, f in enumerate(frames):
            v = path.velocity(s + (j - radius) * step)
            dH.append(np.tensordot(v, grad_all(family, f.point), axes=1))
        self.dH = np.array(dH)
        self.tangent = _apply(self.R, _apply(self.dH, self.states))
        # A = i<n|dn/ds> of the jet gauge; vanishes at the centre
        ref = centre.state
        self.conn = (self.tangent @ ref.conj()).imag / np.abs(self.states @ ref.conj())
        self.energy_rate = _braket(self.states, _apply(self.dH, self.states)).real

    def project(self, kets, r):
        n = _crop(self.states, r)
        return kets - n * _braket(n, kets)[:, None]

    def covariant_derivative(self, kets):
        """(1 - |n><n|)(d/ds + i A) on a jet field; radius shrinks by m."""
        r = (kets.shape[0] - 1) // 2 - self.m
        if r < 0:
            raise StencilFailure("jet too short for covariant derivative")
        d = _fd.grid_derivative(kets, self.step, self.fd_order)
        d = d + 1j * _crop(self.conn, r)[:, None] * _crop(kets, r)
        return self.project(d, r)

    def operator_rate(self, ops):
        """Q (dX/ds) Q for an operator field X on the jet."""
        r = (ops.shape[0] - 1) // 2 - self.m
        d = _fd.grid_derivative(ops, self.step, self.fd_order)
        n = _crop(self.states, r)
        Q = np.eye(ops.shape[-1]) - np.einsum("ja,jb->jab", n, n.conj())
        return Q @ d @ Q

    def resolvent_rate_analytic(self):
        """R (dH/ds - dE_n/ds) R at every jet point (chain rule)."""
        N = self.R.shape[-1]
        mid = self.dH - self.energy_rate[:, None, None] * np.eye(N)
        return self.R @ mid @ self.R


def _log_series(u, p):
    """Coefficients 0..p of log(1 + sum_m u[m] lam^m) with u[0] = 0."""
    out = np.zeros(p + 1)
    power = np.zeros(p + 1)
    power[0] = 1.0
    for r in range(1, p + 1):
        power = np.convolve(power, u)[: p + 1]
        out += (-1) ** (r + 1) * power / r
    return out


def _betas(kets, p):
    """beta_0..beta_p from the normalization of sum lam^k |n_k>, <n|n_k> = 0."""
    u = np.zeros(p + 1)
    for m in range(2, p + 1):
        u[m] = sum(np.vdot(kets[j], kets[m - j]).real for j in range(1, m))
    return -0.5 * _log_series(u, p)


@dataclass(frozen=True)
class LocalExpansion:
    """Correction kets and phase rates at one path point, in path units.

    ``kets[k]`` is |n_k^s>, ``c[k]`` = <T^s|n_k^s> = beta_dot + i alpha_dot
    (c[0] unused), ``beta[k]`` the normalization coefficients.
    """

    s: float
    state: np.ndarray
    energy: float
    tangent: np.ndarray
    kets: np.ndarray
    c: np.ndarray
    beta: np.ndarray
    nabla_T: Optional[np.ndarray] = None
    resolvent_rate: Optional[np.ndarray] = None
    frame: object = field(default=None, repr=False, compare=False)


def _jet_radius(p, m, method):
    if method == "recurrence":
        return max(p - 1, 0) * m
    return {0: 0, 1: 0, 2: m, 3: 2 * m}[p]


def local_expansion(family, path, level, s, p, *, method="recurrence", step=JET_STEP,
                    fd_order=JET_ORDER, gap_tol=None):
    """Correction kets n_0..n_p at ``s`` (path units).

    ``method="recurrence"`` builds every order from the previous one with
    the covariant derivative on the jet; ``method="closed"`` uses the
    explicit formulas, available for p <= 3.
    """
    if not 0 <= p <= P_MAX:
        raise ConfigError(f"order must be in 0..{P_MAX}, got {p}")
    if method == "closed" and p > 3:
        raise ConfigError("closed-form corrections exist only for p <= 3")
    if method not in ("recurrence", "closed"):
        raise ConfigError(f"unknown method {method!r}")
    m = int(_fd.stencil(fd_order)[0].max())
    K = _jet_radius(p, m, method)
    jet = Jet(family, path, level, s, K, step, fd_order, gap_tol)
    T = jet.tangent
    R = jet.R
    n1 = -1j * _apply(R, T)
    fields = [jet.states, n1]
    cs = [None, _braket(T, n1)]
    nabla_T = rdot = None
    if method == "recurrence":
        for q in range(2, p + 1):
            Dn = jet.covariant_derivative(fields[q - 1])
            r = (Dn.shape[0] - 1) // 2
            Rq = _crop(R, r)
            nq = -1j * _apply(Rq, Dn)
            for k in range(1, q - 1):
                nq = nq - 1j * _crop(cs[k], r)[:, None] * _apply(Rq, _crop(fields[q - 1 - k], r))
            fields.append(nq)
            cs.append(_braket(_crop(T, r), nq))
        if K >= m:
            nabla_T = _crop(jet.covariant_derivative(T), 0)[0]
            rdot = _crop(jet.operator_rate(R), 0)[0]
    else:
        if p >= 2:
            dT = jet.covariant_derivative(T)
            rd = jet.operator_rate(R)
            r = K - m
            Rr = _crop(R, r)
            n2 = -_apply(Rr @ Rr, dT) - _apply(Rr @ rd, _crop(T, r))
            fields.append(n2)
            cs.append(_braket(_crop(T, r), n2))
            nabla_T, rdot = _crop(dT, 0)[0], _crop(rd, 0)[0]
        if p >= 3:
            ddT = _crop(jet.covariant_derivative(dT), 0)[0]
            R2 = R @ R
            rate_R2 = _crop(jet.operator_rate(R2), 0)[0]
            rate_RRd = _crop(jet.operator_rate(Rr @ rd), 0)[0]
            Rc, Tc, dTc = _crop(R, 0)[0], _crop(T, 0)[0], _crop(dT, 0)[0]
            alpha1_dot = _crop(cs[1], 0)[0].imag
            n3 = 1j * (Rc @ Rc @ Rc @ ddT + Rc @ rate_R2 @ dTc + Rc @ Rc @ rdot @ dTc
                       + Rc @ rate_RRd @ Tc) + alpha1_dot * (Rc @ _crop(n1, 0)[0])
            fields.append(n3[None, :])
            cs.append(np.array([np.vdot(Tc, n3)]))
    kets = np.array([_crop(f, 0)[0] for f in fields[: p + 1]])
    c = np.array([0.0] + [_crop(ck, 0)[0] for ck in cs[1: p + 1]], dtype=complex)
    return LocalExpansion(s=float(s), state=jet.centre.state, energy=jet.centre.energy,
                          tangent=T[K], kets=kets, c=c, beta=_betas(kets, p),
                          nabla_T=nabla_T, resolvent_rate=rdot, frame=jet.centre)


# -- single-point operations, physical units ------------------------------


def resolvent_apply(frame, k, w):
    """sum_{m != n} |m><m|w> / (E_n - E_m)^k for w orthogonal to |n>."""
    w = np.asarray(w, dtype=complex)
    overlap = abs(np.vdot(frame.state, w))
    if overlap > ORTHO_TOL * max(1.0, float(np.linalg.norm(w))):
        raise NotOrthogonal(f"<n|w> = {overlap:.3e} exceeds {ORTHO_TOL:g}")
    return frame.resolvent(k) @ w


def tangent_ket(system, s):
    """|T> = |D_mu n> dx^mu/dt at path parameter ``s``."""
    tf = covariant_frame(system.family, system.path(s), system.level,
                         gap_tol=system.gap_tol)
    return system.path.velocity(s) @ tf.dkets / system.T


def covariant_time_derivative(system, ketfield, s, *, step=JET_STEP, fd_order=JET_ORDER):
    """(1 - |n><n|)(d/dt + i A_mu dx^mu/dt) applied to ``ketfield``.

    ``ketfield(s)`` returns a ket in the gauge of :func:`eigensystem` (the
    family's own gauge); the result is in the same gauge at ``s``.
    """
    m = int(_fd.stencil(fd_order)[0].max())
    fam = system.family
    jet = Jet(fam, system.path, system.level, s, m, step, fd_order, system.gap_tol)
    vals = []
    for j, fr in enumerate(jet.frames):
        own = eigensystem(fam, fr.point, system.level, gap_tol=system.gap_tol).state
        # rephase from the family gauge into the jet gauge
        vals.append(np.asarray(ketfield(s + (j - m) * step), dtype=complex)
                    * np.vdot(own, fr.state))
    return jet.covariant_derivative(np.array(vals))[0] / system.T


def resolvent_rate(system, s, *, backend="fd", step=JET_STEP, fd_order=JET_ORDER):
    """Q (d/dt (E_n - H)^{-1}) Q at ``s``.

    ``backend="fd"`` differentiates the restricted resolvent on the jet;
    ``backend="analytic"`` uses R (dH/dt - dE_n/dt) R.
    """
    m = int(_fd.stencil(fd_order)[0].max())
    jet = Jet(system.family, system.path, system.level, s, m if backend == "fd" else 0,
              step, fd_order, system.gap_tol)
    if backend == "fd":
        out = jet.operator_rate(jet.R)[0]
    elif backend == "analytic":
        out = jet.resolvent_rate_analytic()[0]
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    return out / system.T


def _to_physical(loc, T, p):
    data = []
    for k in range(1, p + 1):
        scale = T ** k
        rate = loc.c[k] / (scale * T)
        data.append(APTOrderData(order=k, ket=loc.kets[k] / scale, beta=loc.beta[k] / scale,
                                 beta_dot=float(rate.real), alpha_dot=float(rate.imag)))
    return data


def corrections(system, s, p=3, *, method="closed", **jet_kw):
    """Correction kets |n_1>..|n_p> at ``s`` from the explicit formulas."""
    loc = local_expansion(system.family, system.path, system.level, s, p,
                          method=method, gap_tol=system.gap_tol, **jet_kw)
    return _to_physical(loc, system.T, p)


def recurrence(system, s, p, **jet_kw):
    """Correction kets |n_1>..|n_p> at ``s`` from the recurrence."""
    loc = local_expansion(system.family, system.path, system.level, s, p,
                          method="recurrence", gap_tol=system.gap_tol, **jet_kw)
    return _to_physical(loc, system.T, p)


def recurrence_step(jet, history, rates):
    """Next correction on a jet from the previous ones (path units).

    Parameters
    ----------
    jet : Jet
    history : list of arrays
        Jet fields of |n_0>, |n_1>, ..., |n_{p-1}> (any radii, centred).
    rates : list of arrays
        Jet fields of c_k = <T|n_k> for k = 1..p-1 (entry 0 ignored).

    Returns
    -------
    n_p, c_p : arrays on the largest radius the stencil allows.
    """
    p = len(history)
    if p == 1:
        n1 = -1j * _apply(jet.R, jet.tangent)
        return n1, _braket(jet.tangent, n1)
    Dn = jet.covariant_derivative(history[p - 1])
    r = (Dn.shape[0] - 1) // 2
    Rr = _crop(jet.R, r)
    out = -1j * _apply(Rr, Dn)
    for k in range(1, p - 1):
        out = out - 1j * _crop(rates[k], r)[:, None] * _apply(Rr, _crop(history[p - 1 - k], r))
    return out, _braket(_crop(jet.tangent, r), out)


def phase_coefficients(system, s, **jet_kw):
    """alpha1_dot, beta2, alpha2_dot, beta2_dot and beta3 at ``s``."""
    loc = local_expansion(system.family, system.path, system.level, s, 3,
                          method="closed", gap_tol=system.gap_tol, **jet_kw)
    T = system.T
    return {"alpha1_dot": float(loc.c[1].imag) / T ** 2,
            "beta2": float(loc.beta[2]) / T ** 2,
            "alpha2_dot": float(loc.c[2].imag) / T ** 3,
            "beta2_dot": float(loc.c[2].real) / T ** 3,
            "beta3": float(loc.beta[3]) / T ** 3}


def response(system, s, **jet_kw):
    """Induced mass tensor and the third-order energy at ``s``."""
    fam, hbar, T = system.family, system.hbar, system.T
    tf = covariant_frame(fam, system.path(s), system.level, gap_tol=system.gap_tol)
    R = tf.frame.resolvent(1)
    mass2 = -2.0 * hbar ** 2 * (tf.dkets.conj() @ R @ tf.dkets.T).real
    mass2 = 0.5 * (mass2 + mass2.T)
    xdot = system.path.velocity(s) / T
    loc = local_expansion(fam, system.path, system.level, s, 2, method="closed",
                          gap_tol=system.gap_tol, **jet_kw)
    Ts, Rc = loc.tangent, loc.frame.resolvent(1)
    t1 = -2.0 * (hbar / T) ** 3 * np.vdot(Ts, Rc @ Rc @ loc.nabla_T).imag
    t2 = -2.0 * (hbar / T) ** 3 * np.vdot(Ts, Rc @ loc.resolvent_rate @ Ts).imag
    energy3 = loc.energy + 0.5 * xdot @ mass2 @ xdot + t1 + t2
    return ResponseTensors(mass2=mass2, energy3=float(energy3),
                           en3_terms=(float(t1), float(t2)), energy=loc.energy)


# -- solution along the path ----------------------------------------------


@dataclass(frozen=True)
class APTSolution:
    """p-th order adiabatic solution sampled at ``s`` (physical units).

    ``alpha[:, k-1]`` and ``beta[:, k-1]`` are alpha_k and beta_k (without
    the hbar^k factors), ``kets[:, k]`` is |n_k>.
    """

    system: DrivenSystem
    order: int
    s: np.ndarray
    t: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    alpha_dot: np.ndarray
    beta_dot: np.ndarray
    kets: np.ndarray
    states: np.ndarray

    def order_data(self, i):
        return [APTOrderData(order=k, ket=self.kets[i, k], beta=float(self.beta[i, k - 1]),
                             beta_dot=float(self.beta_dot[i, k - 1]),
                             alpha_dot=float(self.alpha_dot[i, k - 1]),
                             alpha=float(self.alpha[i, k - 1]))
                for k in range(1, self.order + 1)]

    def norm_deviation(self):
        return np.abs(np.linalg.norm(self.states, axis=1) - 1.0)


class AdiabaticExpansion:
    """APT data of one (family, path, level, order) on a set of samples.

    Local kets, the dynamical phase, the Berry phase and the alpha_k
    integrals are computed once in path units; :meth:`solution` scales
    them to any T and hbar.
    """

    def __init__(self, family, path, level=0, order=2, s_values=None, *,
                 method="recurrence", step=JET_STEP, fd_order=JET_ORDER, gap_tol=None,
                 quad_tol=1e-11):
        if s_values is None:
            s_values = np.linspace(0.0, 1.0, 11)
        s_values = np.asarray(s_values, dtype=float)
        if s_values.ndim != 1 or s_values.size == 0 or np.any(np.diff(s_values) < 0):
            raise ConfigError("sample times must be a non-empty increasing sequence")
        if s_values[0] < 0.0 or s_values[-1] > 1.0:
            raise ConfigError("sample times must lie in [0, T]")
        self.family, self.path, self.level, self.order = family, path, level, order
        self.kw = dict(method=method, step=step, fd_order=fd_order, gap_tol=gap_tol)
        self.s = s_values
        self.local = [self._local(s, order) for s in s_values]
        self.phi_s = self._cumulative(lambda s: -eigensystem(family, path(s), level,
                                                             gap_tol=gap_tol).energy,
                                      quad_tol, scalar=True)
        if order >= 1:
            self.alpha_s = self._cumulative(lambda s: self._local(s, order).c[1:].imag,
                                            quad_tol, scalar=False)
        else:
            self.alpha_s = np.zeros((s_values.size, 0))
        self.pt_states, self.gamma = parallel_transport_states(family, path, level, s_values,
                                                               gap_tol=gap_tol)

    def _local(self, s, p):
        return local_expansion(self.family, self.path, self.level, s, p, **self.kw)

    def _cumulative(self, f, tol, scalar):
        knots = np.concatenate([[0.0], self.s])
        parts = []
        for a, b in zip(knots[:-1], knots[1:]):
            if b == a:
                parts.append(0.0 if scalar else np.zeros(self.order))
            elif scalar:
                parts.append(quad(f, a, b, epsabs=tol * 1e-2, epsrel=tol, limit=200)[0])
            else:
                parts.append(quad_vec(f, a, b, epsabs=tol, epsrel=tol * 10, norm="max",
                                      limit=200)[0])
        return np.cumsum(np.array(parts), axis=0)

    def solution(self, T, hbar=1.0, order=None):
        """Assembled psi^(p) at the samples for total time ``T``."""
        p = self.order if order is None else order
        if p > self.order:
            raise ConfigError(f"expansion was built to order {self.order}, asked for {p}")
        system = DrivenSystem(self.family, self.path, T, hbar, self.level,
                              self.kw["gap_tol"])
        lam = hbar / T
        M = self.s.size
        kets = np.array([[loc.kets[k] / T ** k for k in range(p + 1)] for loc in self.local])
        beta = np.array([[loc.beta[k] / T ** k for k in range(1, p + 1)] for loc in self.local]
                        ).reshape(M, p)
        rates = np.array([[loc.c[k] / T ** (k + 1) for k in range(1, p + 1)]
                          for loc in self.local]).reshape(M, p)
        alpha = self.alpha_s[:, :p] / T ** np.arange(1, p + 1)
        expo = 1j * (T / hbar) * self.phi_s + 1j * self.gamma
        for k in range(1, p + 1):
            expo = expo + lam ** k * (self.beta_scaled(k) + 1j * self.alpha_s[:, k - 1])
        series = np.zeros((M, self.family.dim), dtype=complex)
        for k in range(p + 1):
            series += lam ** k * np.array([loc.kets[k] for loc in self.local])
        states = np.exp(expo)[:, None] * series
        return APTSolution(system=system, order=p, s=self.s.copy(), t=self.s * T,
                           phi=self.phi_s * T, gamma=self.gamma.copy(), alpha=alpha,
                           beta=beta, alpha_dot=rates.imag, beta_dot=rates.real,
                           kets=kets, states=states)

    def beta_scaled(self, k):
        return np.array([loc.beta[k] for loc in self.local])


def solve(system, order, s_values=None, **kw):
    """APT solution of ``system`` at the sample parameters ``s_values``."""
    exp = AdiabaticExpansion(system.family, system.path, system.level, order, s_values,
                             gap_tol=system.gap_tol, **kw)
    return exp.solution(system.T, system.hbar)


def assemble_state(system, t, p, **kw):
    """psi^(p) at physical time ``t``."""
    s = float(t) / system.T
    return solve(system, p, [s], **kw).states[0]


def energy_expectation(family, sol):
    """<psi|H|psi> / <psi|psi> at the samples of ``sol``."""
    out = []
    for s, psi in zip(sol.s, sol.states):
        H = family(sol.system.path(s))
        out.append((np.vdot(psi, H @ psi) / np.vdot(psi, psi)).real)
    return np.array(out)

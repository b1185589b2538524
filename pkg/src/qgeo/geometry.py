"""Gauge-covariant tangent frames, the quantum geometric tensor, quantum
Christoffel symbols and the curvature of the induced connection.

Index conventions (all arrays are zero-based):

* ``dkets[mu]``                 |D_mu n>
* ``h[mu, nu]``                 <D_mu n|D_nu n>
* ``Christoffel.first[l, m, n]``  <D_l n|D_m D_n n>
* ``Christoffel.second[k, m, n]`` h^{k l} first[l, m, n]
* ``CurvatureTensor.mixed[k, n, l, m]``  R^k_{n l m}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fd
from .errors import DomainError, FrameMismatch, SingularQGT, StencilFailure
from .models import (DEFAULT_FD_ORDER, DEFAULT_FD_STEP, EigenFrame, eigensystem,
                     gauge_fix, grad_all)

COND_MAX = 1e10
# outer step for derivatives of quantities that already contain one stencil
CURVATURE_FD_STEP = 5e-3


@dataclass(frozen=True)
class TangentFrame:
    frame: EigenFrame
    dkets: np.ndarray       # (n, N)
    berry_conn: np.ndarray  # (n,)
    dH: np.ndarray          # (n, N, N)

    @property
    def nparams(self):
        return self.dkets.shape[0]


@dataclass(frozen=True)
class QGT:
    h: np.ndarray
    g: np.ndarray
    B: np.ndarray

    @classmethod
    def from_h(cls, h):
        return cls(h=h, g=h.real.copy(), B=-2.0 * h.imag)


@dataclass(frozen=True)
class Christoffel:
    first: np.ndarray
    second: Optional[np.ndarray]
    gamma: np.ndarray
    c: np.ndarray
    h_cond: float
    qgt: QGT


@dataclass(frozen=True)
class CurvatureTensor:
    mixed: np.ndarray
    covariant: np.ndarray

    def residuals(self):
        """Relative antisymmetry (last pair) and anti-Hermiticity (first pair)."""
        R = self.covariant
        scale = max(float(np.max(np.abs(R))), 1e-300)
        antisym = np.max(np.abs(R + R.transpose(0, 1, 3, 2)))
        antiherm = np.max(np.abs(R + R.transpose(1, 0, 2, 3).conj()))
        return {"antisymmetry": float(antisym / scale),
                "anti_hermiticity": float(antiherm / scale),
                "max_abs": float(np.max(np.abs(R)))}


def _seed_connection(frame, dkets, family):
    """Berry connection A_mu = i<n|d_mu n> of the frame's own gauge.

    The seed gauge keeps the largest component ``k`` of |n> real positive,
    i.e. <e_k|n> > 0, so that Im<e_k|d_mu n> = 0 and
    A_mu = Im<e_k|D_mu n> / |<e_k|n>|.
    """
    n = frame.state
    k = int(np.argmax(np.abs(n)))
    phase = n[k] / abs(n[k])
    A = (dkets[:, k] * phase.conjugate()).imag / abs(n[k])
    if family.gauge is not None:
        A = A - np.array([_fd.central_diff(family.gauge, frame.point, mu)
                          for mu in range(family.nparams)])
    return A


def covariant_frame(family, x, n=0, *, backend="sos", gap_tol=None,
                    fd_step=DEFAULT_FD_STEP, fd_order=DEFAULT_FD_ORDER):
    """Gauge-covariant kets |D_mu n> at ``x``.

    ``backend="sos"`` uses the sum over states
    sum_{m != n} |m><m|d_mu H|n> / (E_n - E_m); ``backend="fd"``
    differentiates gauge-fixed eigenvectors and projects out |n>.
    """
    x = np.asarray(x, dtype=float)
    frame = eigensystem(family, x, n, gap_tol=gap_tol)
    dH = grad_all(family, x, rel_step=fd_step, order=fd_order)
    if backend == "sos":
        R = frame.resolvent(1)
        dkets = np.einsum("ij,mjk,k->mi", R, dH, frame.state)
    elif backend == "fd":
        dkets = _fd_dkets(family, frame, n, gap_tol, fd_step, fd_order)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    A = _seed_connection(frame, dkets, family)
    return TangentFrame(frame=frame, dkets=dkets, berry_conn=A, dH=dH)


def _fd_dkets(family, frame, n, gap_tol, fd_step, fd_order):
    x = frame.point
    nvec = frame.state

    def fixed_state(y):
        other = eigensystem(family, y, n, gap_tol=gap_tol)
        return gauge_fix(other, frame).state

    out = []
    for mu in range(family.nparams):
        try:
            dn = _fd.central_diff(fixed_state, x, mu, fd_step, fd_order)
        except FrameMismatch as exc:
            raise StencilFailure(str(exc)) from exc
        out.append(dn - nvec * np.vdot(nvec, dn))
    return np.array(out)


def qgt(tf):
    """Quantum geometric tensor h = <D_mu n|D_nu n> with g = Re h, B = -2 Im h."""
    d = tf.dkets
    h = d.conj() @ d.T
    return QGT.from_h(0.5 * (h + h.conj().T))


def qgt_at(family, x, n=0, **kw):
    return qgt(covariant_frame(family, x, n, **kw))


def _stencil_tangent_frames(family, center, n, mu, gap_tol, fd_step, fd_order):
    """Tangent frames on the mu-stencil, rephased to be smooth with ``center``."""
    x = center.frame.point
    h = _fd.coordinate_step(x, mu, fd_step)
    offsets, weights = _fd.stencil(fd_order)
    frames = []
    for k in offsets:
        xs = x.copy()
        xs[mu] += k * h
        try:
            tf = covariant_frame(family, xs, n, gap_tol=gap_tol,
                                 fd_step=fd_step, fd_order=fd_order)
            ov = np.vdot(center.frame.state, tf.frame.state)
            if abs(ov) <= 0.5:
                raise FrameMismatch(f"stencil overlap {abs(ov):.3f} at offset {k}")
        except FrameMismatch as exc:
            raise StencilFailure(str(exc)) from exc
        except DomainError as exc:
            raise SingularQGT(f"stencil leaves the coordinate chart: {exc}") from exc
        frames.append((tf, ov.conj() / abs(ov)))
    return h, weights, frames


def second_covariant_all(family, x, n=0, *, gap_tol=None, fd_step=DEFAULT_FD_STEP,
                         fd_order=DEFAULT_FD_ORDER, center=None):
    """All |D_mu D_nu n>, shape (n, n, N), plus the central tangent frame.

    Computed as d_mu |D_nu n> in the gauge that is smooth across the
    stencil and agrees with the central frame; its connection vanishes
    at the centre, so no A_mu term is needed.
    """
    if center is None:
        center = covariant_frame(family, x, n, gap_tol=gap_tol,
                                 fd_step=fd_step, fd_order=fd_order)
    npar = family.nparams
    out = np.zeros((npar, npar, family.dim), dtype=complex)
    for mu in range(npar):
        h, weights, frames = _stencil_tangent_frames(family, center, n, mu, gap_tol,
                                                     fd_step, fd_order)
        acc = np.zeros((npar, family.dim), dtype=complex)
        for w, (tf, phase) in zip(weights, frames):
            acc += w * phase * tf.dkets
        out[mu] = acc / h
    return out, center


def second_covariant(family, x, n, mu, nu, **kw):
    """|D_mu D_nu n> at ``x``."""
    dd, _ = second_covariant_all(family, x, n, **kw)
    return dd[mu, nu]


def christoffel(family, x, n=0, *, raise_index=True, cond_max=COND_MAX, gap_tol=None,
                fd_step=DEFAULT_FD_STEP, fd_order=DEFAULT_FD_ORDER):
    """Quantum Christoffel symbols of the first and second kind.

    The second kind requires an invertible QGT. With ``raise_index=True`` a
    condition number above ``cond_max`` raises :class:`SingularQGT`;
    otherwise ``second`` is left as ``None``.
    """
    x = np.asarray(x, dtype=float)
    try:
        dd, tf = second_covariant_all(family, x, n, gap_tol=gap_tol,
                                      fd_step=fd_step, fd_order=fd_order)
    except DomainError as exc:
        raise SingularQGT(f"chart singularity at x={x}: {exc}") from exc
    q = qgt(tf)
    first = np.einsum("li,mni->lmn", tf.dkets.conj(), dd)
    cond = float(np.linalg.cond(q.h))
    second = None
    if np.isfinite(cond) and cond <= cond_max:
        npar = family.nparams
        second = np.linalg.solve(q.h, first.reshape(npar, -1)).reshape(first.shape)
    elif raise_index:
        raise SingularQGT(f"QGT condition number {cond:.3e} exceeds {cond_max:.1e} at x={x}")
    return Christoffel(first=first, second=second, gamma=first.real.copy(),
                       c=first.imag.copy(), h_cond=cond, qgt=q)


def compatibility_check(family, x, n=0, *, gap_tol=None, fd_step=DEFAULT_FD_STEP,
                        fd_order=DEFAULT_FD_ORDER):
    """Residuals of the identities tying the Christoffel symbols to h.

    Returns a dict of maximum absolute residuals:

    ``symmetry``             U_{lmn} - U_{lnm}
    ``compatibility``        d_m h_{ln} - U_{lmn} - conj(U_{nml})
    ``real_identity``        Re U_{lmn} - (d_n g_{lm} + d_m g_{nl} - d_l g_{mn}) / 2
    ``imag_identity``        Im U_{lmn} - Im U_{nml} + d_m B_{ln} / 2
    ``normal_component``     <n|D_m D_n n> + <D_m n|D_n n>
    """
    x = np.asarray(x, dtype=float)
    dd, tf = second_covariant_all(family, x, n, gap_tol=gap_tol,
                                  fd_step=fd_step, fd_order=fd_order)
    U = np.einsum("li,mni->lmn", tf.dkets.conj(), dd)
    h = qgt(tf).h

    def h_of(y):
        return qgt_at(family, y, n, gap_tol=gap_tol, fd_step=fd_step, fd_order=fd_order).h

    dh = np.array([_fd.central_diff(h_of, x, mu, fd_step, fd_order)
                   for mu in range(family.nparams)])  # dh[m, l, n] = d_m h_{ln}
    dg, dB = dh.real, -2.0 * dh.imag
    compat = dh.transpose(1, 0, 2) - U - U.transpose(2, 1, 0).conj()
    real_rhs = 0.5 * (dg.transpose(1, 2, 0) + dg.transpose(2, 0, 1) - dg)
    # real_rhs[l, m, n] = (dg[n, l, m] + dg[m, n, l] - dg[l, m, n]) / 2
    imag = U.imag - U.imag.transpose(2, 1, 0) + 0.5 * dB.transpose(1, 0, 2)
    normal = np.einsum("i,mni->mn", tf.frame.state.conj(), dd) + h
    return {
        "symmetry": float(np.max(np.abs(U - U.transpose(0, 2, 1)))),
        "compatibility": float(np.max(np.abs(compat))),
        "real_identity": float(np.max(np.abs(U.real - real_rhs))),
        "imag_identity": float(np.max(np.abs(imag))),
        "normal_component": float(np.max(np.abs(normal))),
    }


def imag_christoffel_identity(family, x, n=0, *, component=None, gap_tol=None,
                              fd_step=DEFAULT_FD_STEP, fd_order=DEFAULT_FD_ORDER):
    """C_{lmn} from ordinary derivatives of a smooth, non-parallel gauge:

        C = Im<d_l n|d_m d_n n> + A_l g_{mn} + A_m g_{ln} + A_n g_{lm} + A_l A_m A_n.

    The gauge keeps component ``component`` of |n> real positive (default:
    the largest one at ``x``), so A_mu = i<n|d_mu n> does not vanish.
    """
    x = np.asarray(x, dtype=float)
    centre = eigensystem(family, x, n, gap_tol=gap_tol).state
    k = int(np.argmax(np.abs(centre))) if component is None else int(component)

    def state(y):
        v = eigensystem(family, y, n, gap_tol=gap_tol).state
        if abs(v[k]) < 1e-3:
            raise SingularQGT(f"component {k} of the state vanishes near x={y}")
        return v * (v[k].conjugate() / abs(v[k]))

    npar = family.nparams
    psi = state(x)
    d1 = np.array([_fd.central_diff(state, x, mu, fd_step, fd_order) for mu in range(npar)])
    d2 = np.array([[_fd.central_diff(lambda y, nu=nu: _fd.central_diff(state, y, nu, fd_step,
                                                                        fd_order),
                                     x, mu, fd_step, fd_order)
                    for nu in range(npar)] for mu in range(npar)])
    A = -np.einsum("i,mi->m", psi.conj(), d1).imag  # i<n|dn> is real
    D = d1 + 1j * A[:, None] * psi
    g = np.einsum("mi,ni->mn", D.conj(), D).real
    core = np.einsum("li,mni->lmn", d1.conj(), d2).imag
    return (core + np.einsum("l,mn->lmn", A, g) + np.einsum("m,ln->lmn", A, g)
            + np.einsum("n,lm->lmn", A, g) + np.einsum("l,m,n->lmn", A, A, A))


def curvature(family, x, n=0, *, cond_max=COND_MAX, gap_tol=None,
              fd_step=DEFAULT_FD_STEP, fd_order=DEFAULT_FD_ORDER,
              outer_step=CURVATURE_FD_STEP):
    """Curvature of the quantum covariant derivative.

    R^k_{nlm} = d_l U^k_{mn} - d_m U^k_{ln} + U^k_{la} U^a_{mn} - U^k_{ma} U^a_{ln},
    with the partial derivatives taken by finite differences of the
    second-kind symbols (step ``outer_step``), and R_{knlm} = h_{kr} R^r_{nlm}.
    """
    x = np.asarray(x, dtype=float)
    kw = dict(cond_max=cond_max, gap_tol=gap_tol, fd_step=fd_step, fd_order=fd_order)
    ch = christoffel(family, x, n, **kw)
    U = ch.second
    npar = family.nparams

    def second_of(y):
        return christoffel(family, y, n, **kw).second

    dU = np.array([_fd.central_diff(second_of, x, lam, outer_step, fd_order)
                   for lam in range(npar)])  # dU[l, k, m, n] = d_l U^k_{mn}
    mixed = (np.einsum("lkmn->knlm", dU) - np.einsum("mkln->knlm", dU)
             + np.einsum("kla,amn->knlm", U, U) - np.einsum("kma,aln->knlm", U, U))
    covariant = np.einsum("kr,rnlm->knlm", ch.qgt.h, mixed)
    return CurvatureTensor(mixed=mixed, covariant=covariant)

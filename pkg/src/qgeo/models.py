"""Parametrized Hamiltonian families, gauge-seeded eigensystems and the
built-in reference models.

The three-state reference model realizes the state

    |psi> = (sqrt((p1-p2)/2) e^{-i q1} e^{i q2},
             sqrt((p1+p2)/2) e^{-i q1} e^{-i q2},
             sqrt(1-p1))

as the ground state of ``H = W D W^dagger``, where ``W`` is a product of
SU(3) rotations about the Gell-Mann generators lambda_3, lambda_2,
lambda_3, lambda_7 and ``D`` is diagonal with a nondegenerate spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _fd
from .errors import DegenerateLevel, DomainError, FrameMismatch, NonHermitian

DEFAULT_FD_STEP = 2e-4
DEFAULT_FD_ORDER = 4
HERMITICITY_TOL = 1e-12
GAP_TOL_REL = 1e-8


@dataclass(frozen=True)
class HamiltonianFamily:
    """Smooth map from parameter points to N x N Hermitian matrices.

    Parameters
    ----------
    dim : int
        Hilbert-space dimension N.
    nparams : int
        Number of parameters n.
    eval : callable
        ``eval(x) -> (N, N) complex array``.
    grad : callable, optional
        ``grad(x, mu) -> (N, N) complex array``; finite differences are used
        when absent.
    grads : callable, optional
        ``grads(x) -> (n, N, N)`` all partials at once; a faster path for
        ``grad`` that must agree with it.
    delta : float
        Characteristic energy scale, used for ``eps = hbar / (delta T)`` and
        the default degeneracy tolerance.
    gauge : callable, optional
        ``gauge(x) -> float``. The tracked eigenvector returned by
        :func:`eigensystem` is multiplied by ``exp(i gauge(x))``. Used to
        probe gauge invariance; geometric output must not depend on it.
    """

    dim: int
    nparams: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    delta: float = 1.0
    name: str = "custom"
    gauge: Optional[Callable[[np.ndarray], float]] = None
    sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = field(
        default=None, compare=False)
    grads: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.nparams < 1:
            raise ValueError("dim and nparams must be positive")
        if not self.delta > 0:
            raise ValueError("energy scale delta must be positive")

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def with_gauge(self, f):
        return replace(self, gauge=f)

    def sample(self, rng):
        """Random valid parameter point (uniform in [-1, 1]^n by default)."""
        if self.sampler is not None:
            return np.asarray(self.sampler(rng), dtype=float)
        return rng.uniform(-1.0, 1.0, self.nparams)


@dataclass(frozen=True)
class EigenFrame:
    """Eigensystem of H(x) with a tracked nondegenerate level."""

    point: np.ndarray
    energies: np.ndarray
    states: np.ndarray  # columns are eigenvectors
    index: int
    gap: float

    @property
    def state(self):
        return self.states[:, self.index]

    @property
    def energy(self):
        return float(self.energies[self.index])

    @property
    def dim(self):
        return self.states.shape[0]

    def projector(self):
        n = self.state
        return np.outer(n, n.conj())

    def resolvent(self, power=1):
        """Matrix of sum_{m != n} |m><m| / (E_n - E_m)^power."""
        w = self.energy - self.energies
        w[self.index] = np.inf
        coeff = 1.0 / w ** power
        coeff[self.index] = 0.0
        return (self.states * coeff) @ self.states.conj().T

    def with_state_phase(self, phase):
        states = self.states.copy()
        states[:, self.index] *= phase
        return replace(self, states=states)


@dataclass(frozen=True)
class CanonicalState:
    """Canonical coordinates (q1, q2, p1, p2) of the three-state model."""

    q1: float
    q2: float
    p1: float
    p2: float

    def __post_init__(self):
        if not (0.0 <= self.p1 <= 1.0):
            raise DomainError(f"p1={self.p1} outside [0, 1]")
        if not (abs(self.p2) <= self.p1):
            raise DomainError(f"p2={self.p2} outside [-p1, p1]")

    @classmethod
    def from_array(cls, xi):
        q1, q2, p1, p2 = (float(v) for v in xi)
        return cls(q1, q2, p1, p2)

    def as_array(self):
        return np.array([self.q1, self.q2, self.p1, self.p2])


def _check_hermitian(H):
    scale = max(1.0, float(np.max(np.abs(H))))
    err = float(np.max(np.abs(H - H.conj().T)))
    if err > HERMITICITY_TOL * scale:
        raise NonHermitian(f"max |H - H^dagger| = {err:.3e}")


def _seed_gauge(V):
    # largest-magnitude component of each column made real positive
    k = np.argmax(np.abs(V), axis=0)
    lead = V[k, np.arange(V.shape[1])]
    return V * (lead.conj() / np.abs(lead))


def eigensystem(family, x, n=0, gap_tol=None):
    """Diagonalize H(x) and track level ``n`` (ascending order).

    Raises
    ------
    NonHermitian
        H(x) is not Hermitian to 1e-12 (relative to its largest entry).
    DegenerateLevel
        The tracked level is within ``gap_tol`` (default 1e-8 delta) of
        another level.
    """
    x = np.asarray(x, dtype=float)
    H = np.asarray(family.eval(x), dtype=complex)
    if H.shape != (family.dim, family.dim):
        raise ValueError(f"H(x) has shape {H.shape}, expected {(family.dim,) * 2}")
    if not 0 <= n < family.dim:
        raise IndexError(f"level {n} out of range for N={family.dim}")
    _check_hermitian(H)
    E, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    V = _seed_gauge(V)
    if family.gauge is not None:
        V[:, n] *= np.exp(1j * family.gauge(x))
    others = np.delete(E, n)
    gap = float(np.min(np.abs(others - E[n]))) if others.size else np.inf
    tol = GAP_TOL_REL * family.delta if gap_tol is None else gap_tol
    if gap <= tol:
        raise DegenerateLevel(f"level {n} gap {gap:.3e} <= {tol:.3e} at x={x}")
    return EigenFrame(point=x, energies=E, states=V, index=n, gap=gap)


def gauge_fix(frame, reference):
    """Rephase the tracked state so that <n_ref|n> is real and positive."""
    ov = np.vdot(reference.state, frame.state)
    mag = abs(ov)
    if mag <= 0.5:
        raise FrameMismatch(f"overlap |<n_ref|n>| = {mag:.3f} too small for phase alignment")
    if abs(ov.imag) <= 1e-15 * mag and ov.real > 0:
        return frame
    return frame.with_state_phase(ov.conj() / mag)


def grad_H(family, x, mu, rel_step=DEFAULT_FD_STEP, order=DEFAULT_FD_ORDER):
    """Partial derivative dH/dx^mu; analytic when the family provides it."""
    x = np.asarray(x, dtype=float)
    if family.grad is not None:
        return np.asarray(family.grad(x, mu), dtype=complex)
    return _fd.central_diff(lambda y: np.asarray(family.eval(y), dtype=complex),
                            x, mu, rel_step, order)


def grad_all(family, x, **kw):
    """All partials dH/dx^mu, shape (n, N, N)."""
    if family.grads is not None:
        return np.asarray(family.grads(np.asarray(x, dtype=float)), dtype=complex)
    return np.stack([grad_H(family, x, mu, **kw) for mu in range(family.nparams)])


# ----------------------------------------------------------------------------
# three-state reference state


def three_state(c):
    """Three-state vector in canonical coordinates (see module docstring)."""
    if not isinstance(c, CanonicalState):
        c = CanonicalState.from_array(c)
    a = np.sqrt(max(0.0, (c.p1 - c.p2) / 2))
    b = np.sqrt(max(0.0, (c.p1 + c.p2) / 2))
    return np.array([
        a * np.exp(-1j * c.q1 + 1j * c.q2),
        b * np.exp(-1j * c.q1 - 1j * c.q2),
        np.sqrt(max(0.0, 1.0 - c.p1)),
    ], dtype=complex)


def three_state_angular(theta, beta, gamma, alpha):
    """Three-state vector in generalized Euler angles."""
    st = np.sin(theta)
    return np.array([
        st * np.sin(beta) * np.exp(-1j * gamma + 1j * alpha),
        st * np.cos(beta) * np.exp(-1j * gamma - 1j * alpha),
        np.cos(theta),
    ], dtype=complex)


def canonical_from_angles(theta, beta, gamma, alpha):
    p1 = np.sin(theta) ** 2
    return CanonicalState(q1=gamma, q2=alpha, p1=p1, p2=p1 * np.cos(2 * beta))


def _rot3(a):
    return np.diag([np.exp(1j * a), np.exp(-1j * a), 1.0]).astype(complex)


def _drot3(a):
    return np.diag([1j * np.exp(1j * a), -1j * np.exp(-1j * a), 0.0])


def _rot2(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]], dtype=complex)


def _drot2(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[-s, c, 0], [-c, -s, 0], [0, 0, 0]], dtype=complex)


def _rot7(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[1, 0, 0], [0, c, s], [0, -s, c]], dtype=complex)


def _drot7(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[0, 0, 0], [0, -s, c], [0, -c, -s]], dtype=complex)


def _angles(xi):
    q1, q2, p1, p2 = xi
    if not (0.0 < p1 <= 1.0) or abs(p2) > p1:
        raise DomainError(f"canonical point (p1={p1}, p2={p2}) outside chart")
    r = min(1.0, max(-1.0, p2 / p1))
    theta = np.arcsin(np.sqrt(p1))
    beta = 0.5 * np.arccos(r)
    return theta, beta, q1, q2  # theta, beta, gamma, alpha


def _three_state_energies(xi):
    _, _, p1, p2 = xi
    return np.array([1.2 + 0.3 * p2, 2.0 + 0.5 * p1, 0.25 * p1])


_ENERGY_GRAD = {
    2: np.array([0.0, 0.5, 0.25]),
    3: np.array([0.3, 0.0, 0.0]),
}


def _three_state_H(xi):
    theta, beta, gamma, alpha = _angles(xi)
    W = _rot3(alpha) @ _rot2(beta) @ _rot3(gamma) @ _rot7(theta)
    return (W * _three_state_energies(xi)) @ W.conj().T


def _three_state_grad(xi, mu):
    return _three_state_grads(xi, (mu,))[0]


def _three_state_grads(xi, mus=(0, 1, 2, 3)):
    theta, beta, gamma, alpha = _angles(xi)
    factors = [_rot3(alpha), _rot2(beta), _rot3(gamma), _rot7(theta)]
    dfactors = [_drot3(alpha), _drot2(beta), _drot3(gamma), _drot7(theta)]
    # dW / d(alpha, beta, gamma, theta) from prefix and suffix products
    left = [np.eye(3, dtype=complex)]
    for F in factors[:-1]:
        left.append(left[-1] @ F)
    right = [np.eye(3, dtype=complex)]
    for F in factors[:0:-1]:
        right.append(F @ right[-1])
    right = right[::-1]
    W = left[3] @ factors[3]
    dW_ang = np.array([left[k] @ dfactors[k] @ right[k] for k in range(4)])
    dang = np.array([_angle_jacobian(xi, mu) for mu in mus])
    dW = np.tensordot(dang, dW_ang, axes=1)
    E = _three_state_energies(xi)
    Wh = W.conj().T
    dWE = (dW * E) @ Wh
    dH = dWE + dWE.conj().transpose(0, 2, 1)
    dE = np.array([_ENERGY_GRAD.get(mu, np.zeros(3)) for mu in mus])
    return dH + np.einsum("ij,mj,jk->mik", W, dE, Wh)


def _angle_jacobian(xi, mu):
    """d(alpha, beta, gamma, theta) / d xi^mu."""
    q1, q2, p1, p2 = xi
    dang = np.zeros(4)
    if mu == 0:
        dang[2] = 1.0
    elif mu == 1:
        dang[0] = 1.0
    else:
        r = p2 / p1
        root = np.sqrt(1.0 - r * r)
        if mu == 2:
            if p1 >= 1.0 or root == 0.0:
                raise DomainError("dH/dp1 singular on chart boundary")
            dang[3] = 1.0 / (2.0 * np.sqrt(p1 * (1.0 - p1)))
            dang[1] = p2 / (2.0 * p1 * p1 * root)
        elif mu == 3:
            if root == 0.0:
                raise DomainError("dH/dp2 singular on chart boundary")
            dang[1] = -1.0 / (2.0 * p1 * root)
        else:
            raise IndexError(mu)
    return dang


def _sample_canonical(rng):
    p1 = rng.uniform(0.15, 0.85)
    p2 = rng.uniform(-0.8, 0.8) * p1
    return np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi), p1, p2])


def three_state_family():
    """Three-state model in canonical coordinates (q1, q2, p1, p2).

    Ground energy 0.25 p1; excited energies 1.2 + 0.3 p2 and 2.0 + 0.5 p1.
    """
    return HamiltonianFamily(dim=3, nparams=4, eval=_three_state_H,
                             grad=_three_state_grad, delta=1.0,
                             name="three_state", sampler=_sample_canonical,
                             grads=_three_state_grads)


def config_embedding(x):
    """Default map from the 2-D configuration torus to canonical coordinates."""
    x1, x2 = x
    return np.array([
        x1,
        x2 + 0.3 * np.sin(x1),
        0.55 + 0.15 * np.cos(x1) * np.sin(x2),
        0.15 * np.sin(x1 + x2),
    ])


def config_embedding_jacobian(x):
    """d xi^a / d x^mu, shape (4, 2)."""
    x1, x2 = x
    c = 0.15 * np.cos(x1 + x2)
    return np.array([
        [1.0, 0.0],
        [0.3 * np.cos(x1), 1.0],
        [-0.15 * np.sin(x1) * np.sin(x2), 0.15 * np.cos(x1) * np.cos(x2)],
        [c, c],
    ])


def three_state_config_family():
    """Three-state model pulled back to a 2-D configuration manifold.

    On this manifold the quantum geometric tensor is invertible, so
    Christoffel symbols of the second kind, transport and curvature exist.
    """
    fam = reparametrize(three_state_family(), config_embedding,
                        config_embedding_jacobian, nparams=2,
                        name="three_state_config")
    return replace(fam, sampler=lambda rng: rng.uniform(0, 2 * np.pi, 2))


def reparametrize(family, chart, jacobian=None, nparams=None, name=None):
    """Pull a family back along ``chart: y -> x``.

    With ``jacobian(y)`` of shape (family.nparams, nparams) the gradient is
    assembled by the chain rule; otherwise finite differences are used.
    """
    if nparams is None:
        nparams = family.nparams

    def ev(y):
        return family.eval(np.asarray(chart(y), dtype=float))

    grad = grads = None
    if jacobian is not None:
        def grad(y, mu):
            x = np.asarray(chart(y), dtype=float)
            J = np.asarray(jacobian(y), dtype=float)
            out = np.zeros((family.dim, family.dim), dtype=complex)
            for a in range(family.nparams):
                if J[a, mu] != 0.0:
                    out += J[a, mu] * grad_H(family, x, a)
            return out

        def grads(y):
            x = np.asarray(chart(y), dtype=float)
            J = np.asarray(jacobian(y), dtype=float)
            used = np.flatnonzero(np.any(J != 0.0, axis=1))
            if used.size == family.nparams:
                base = grad_all(family, x)
            else:
                base = np.array([grad_H(family, x, a) for a in used])
            return np.tensordot(J[used].T, base, axes=1)

    return HamiltonianFamily(dim=family.dim, nparams=nparams, eval=ev, grad=grad,
                             delta=family.delta, grads=grads,
                             name=name or f"{family.name}:pulled_back")


def _pauli():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def two_level_family(coords="qp"):
    """Spin-1/2 in a unit field, H = -n.sigma, ground state
    (cos(theta/2), sin(theta/2) e^{i phi}).

    ``coords="qp"`` uses q = phi, p = sin^2(theta/2); ``coords="bloch"``
    uses (theta, phi).
    """
    if coords == "bloch":
        def ev(x):
            th, ph = x
            return -np.array([[np.cos(th), np.sin(th) * np.exp(-1j * ph)],
                              [np.sin(th) * np.exp(1j * ph), -np.cos(th)]])

        def grad(x, mu):
            th, ph = x
            if mu == 0:
                return -np.array([[-np.sin(th), np.cos(th) * np.exp(-1j * ph)],
                                  [np.cos(th) * np.exp(1j * ph), np.sin(th)]])
            return -np.array([[0, -1j * np.sin(th) * np.exp(-1j * ph)],
                              [1j * np.sin(th) * np.exp(1j * ph), 0]])

        def sampler(rng):
            return np.array([rng.uniform(0.2, np.pi - 0.2), rng.uniform(0, 2 * np.pi)])

    elif coords == "qp":
        def ev(x):
            q, p = x
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"p={p} outside [0, 1]")
            s = 2.0 * np.sqrt(p * (1.0 - p))
            return -np.array([[1 - 2 * p, s * np.exp(-1j * q)],
                              [s * np.exp(1j * q), 2 * p - 1]])

        def grad(x, mu):
            q, p = x
            if not 0.0 < p < 1.0:
                raise DomainError(f"dH/dp singular at p={p}")
            s = 2.0 * np.sqrt(p * (1.0 - p))
            if mu == 0:
                return -np.array([[0, -1j * s * np.exp(-1j * q)],
                                  [1j * s * np.exp(1j * q), 0]])
            ds = (1 - 2 * p) / np.sqrt(p * (1.0 - p))
            return -np.array([[-2, ds * np.exp(-1j * q)],
                              [ds * np.exp(1j * q), 2]])

        def sampler(rng):
            return np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0.05, 0.95)])
    else:
        raise ValueError(f"unknown two-level coordinates {coords!r}")
    return HamiltonianFamily(dim=2, nparams=2, eval=ev, grad=grad, delta=2.0,
                             name=f"two_level:{coords}", sampler=sampler)


def matrix_polynomial(terms, dim, nparams, delta=1.0, domain=None):
    """H(x) = sum_k M_k prod_mu (x^mu)^{powers_k[mu]}.

    ``terms`` is a sequence of ``(powers, matrix)`` pairs.
    """
    powers = np.array([np.asarray(p, dtype=int) for p, _ in terms]).reshape(len(terms), nparams)
    mats = np.array([np.asarray(m, dtype=complex) for _, m in terms]).reshape(len(terms), dim, dim)
    if np.any(powers < 0):
        raise ValueError("monomial powers must be non-negative")

    def ev(x):
        mono = np.prod(np.asarray(x, dtype=float) ** powers, axis=1)
        return np.tensordot(mono, mats, axes=1)

    def grad(x, mu):
        x = np.asarray(x, dtype=float)
        pw = powers.copy()
        coeff = pw[:, mu].astype(float)
        pw[:, mu] = np.maximum(pw[:, mu] - 1, 0)
        mono = coeff * np.prod(x ** pw, axis=1)
        return np.tensordot(mono, mats, axes=1)

    sampler = None
    if domain is not None:
        box = np.asarray(domain, dtype=float).reshape(nparams, 2)
        sampler = lambda rng: rng.uniform(box[:, 0], box[:, 1])  # noqa: E731
    return HamiltonianFamily(dim=dim, nparams=nparams, eval=ev, grad=grad,
                             delta=delta, name="matrix_polynomial", sampler=sampler)


def constant_family(H, nparams=1, delta=1.0):
    H = np.asarray(H, dtype=complex)
    zero = np.zeros_like(H)
    return HamiltonianFamily(dim=H.shape[0], nparams=nparams, eval=lambda x: H,
                             grad=lambda x, mu: zero, delta=delta, name="constant")


def spin_field_family():
    """Spin-1/2 in a Cartesian field, H = -(x sigma_x + y sigma_y + z sigma_z).

    Gap 2|x|; loops are closed in these coordinates, unlike the angles.
    """
    sx, sy, sz = _pauli()
    fam = matrix_polynomial([((1, 0, 0), -sx), ((0, 1, 0), -sy), ((0, 0, 1), -sz)],
                            dim=2, nparams=3, delta=2.0, domain=[(-1, 1)] * 3)
    return replace(fam, name="spin_field")


def three_state_two_level_slice():
    """Three-state model on the slice p1 = 1, q1 = 0 in coordinates
    (q, p) = (2 q2, (1 + p2) / 2), where it reduces to a two-level system."""
    J = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.0], [0.0, 2.0]])
    fam = reparametrize(three_state_family(),
                        lambda y: np.array([0.0, 0.5 * y[0], 1.0, 2.0 * y[1] - 1.0]),
                        lambda y: J, nparams=2, name="three_state:two_level_slice")
    return replace(fam, sampler=lambda rng: np.array([rng.uniform(0, 2 * np.pi),
                                                      rng.uniform(0.05, 0.95)]))

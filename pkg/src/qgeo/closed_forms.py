"""Closed-form geometry of the builtin models, used as reference values."""

import numpy as np


def two_level_metric(p):
    """Quantum metric of the two-level state in (q, p) coordinates."""
    return np.diag([p * (1.0 - p), 1.0 / (4.0 * p * (1.0 - p))])


def three_state_metric(p1, p2):
    """Quantum metric of the three-state model in (q1, q2, p1, p2)."""
    d = p1 * p1 - p2 * p2
    g = np.zeros((4, 4))
    g[0, 0] = p1 * (1.0 - p1)
    g[0, 1] = g[1, 0] = p2 * (1.0 - p1)
    g[1, 1] = p1 - p2 * p2
    g[2, 2] = (p1 - p2 * p2) / (4.0 * (1.0 - p1) * d)
    g[2, 3] = g[3, 2] = -p2 / (4.0 * d)
    g[3, 3] = p1 / (4.0 * d)
    return g


def three_state_curvature():
    """Berry curvature of the three-state model in (q1, q2, p1, p2)."""
    B = np.zeros((4, 4))
    B[0, 2] = B[1, 3] = -1.0
    B[2, 0] = B[3, 1] = 1.0
    return B


def three_state_connection(p1, p2):
    """Berry connection A = p1 dq1 + p2 dq2 in the gauge with real third component."""
    return np.array([p1, p2, 0.0, 0.0])


def three_state_state(q1, q2, p1, p2):
    """Three-state vector in canonical coordinates (third component real)."""
    return np.array([np.sqrt((p1 - p2) / 2) * np.exp(-1j * (q1 - q2)),
                     np.sqrt((p1 + p2) / 2) * np.exp(-1j * (q1 + q2)),
                     np.sqrt(1 - p1)])


def three_state_dkets(q1, q2, p1, p2):
    """Covariant kets |D_m psi>, m = q1, q2, p1, p2, rows of a (4, 3) array,
    in the gauge of :func:`three_state_state`."""
    a, b = np.exp(-1j * (q1 - q2)), np.exp(-1j * (q1 + q2))
    rm, rp, r3 = np.sqrt((p1 - p2) / 2), np.sqrt((p1 + p2) / 2), np.sqrt(1 - p1)
    return np.array([
        [-1j * (1 - p1) * rm * a, -1j * (1 - p1) * rp * b, 1j * p1 * r3],
        [1j * (1 + p2) * rm * a, -1j * (1 - p2) * rp * b, 1j * p2 * r3],
        [0.25 * np.sqrt(2 / (p1 - p2)) * a, 0.25 * np.sqrt(2 / (p1 + p2)) * b, -0.5 / r3],
        [-0.25 * np.sqrt(2 / (p1 - p2)) * a, 0.25 * np.sqrt(2 / (p1 + p2)) * b, 0.0],
    ])

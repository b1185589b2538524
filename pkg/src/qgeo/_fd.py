"""Central finite-difference stencils."""

import numpy as np

from .errors import StepUnderflow

# offsets and weights of first-derivative central stencils, keyed by order
STENCILS = {
    2: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    4: (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    6: (np.array([-3, -2, -1, 1, 2, 3]),
        np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0),
}

MIN_STEP = 1e-12


def stencil(order):
    try:
        return STENCILS[order]
    except KeyError:
        raise ValueError(f"no central stencil of order {order}") from None


def coordinate_step(x, mu, rel_step):
    """Step for coordinate ``mu``: ``rel_step`` scaled by max(1, |x_mu|)."""
    h = rel_step * max(1.0, abs(float(x[mu])))
    if h < MIN_STEP:
        raise StepUnderflow(f"finite-difference step {h:g} below {MIN_STEP:g}")
    return h


def central_diff(f, x, mu, rel_step=1e-3, order=4):
    """d f / d x^mu at ``x`` by a central stencil; ``f`` may be array-valued."""
    x = np.asarray(x, dtype=float)
    h = coordinate_step(x, mu, rel_step)
    offsets, weights = stencil(order)
    acc = None
    for k, w in zip(offsets, weights):
        xs = x.copy()
        xs[mu] += k * h
        term = w * np.asarray(f(xs))
        acc = term if acc is None else acc + term
    return acc / h


def grid_derivative(values, h, order=4):
    """Apply a central stencil along axis 0 of samples on a uniform grid.

    ``values`` holds 2r+1 samples centred on the point of interest; the
    result holds the 2(r-m)+1 interior derivatives, m the stencil half-width.
    """
    offsets, weights = stencil(order)
    m = int(offsets.max())
    n = values.shape[0]
    if n < 2 * m + 1:
        raise ValueError("not enough grid samples for stencil")
    out = np.zeros((n - 2 * m,) + values.shape[1:], dtype=np.result_type(values, float))
    for k, w in zip(offsets, weights):
        out = out + w * values[m + k: n - m + k]
    return out / h

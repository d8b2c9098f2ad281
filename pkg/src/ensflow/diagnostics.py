"""Numerical checks shared by tests, scripts and the experiment harness."""

import numpy as np


def rms(estimate, truth):
    """Root mean square over every scalar component (u and v alike)."""
    r = np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(r * r)))


def divergence_fd(field, points, step):
    """Divergence of a vector field by fourth-order central differences.

    Parameters
    ----------
    field : callable
        Maps an ``(N, 2)`` array of positions to an ``(N, 2)`` array of flows.
    points : array_like, shape (N, 2)
    step : float
        Stencil spacing ``h``; the stencil uses offsets ``+-h`` and ``+-2h``.

    Returns
    -------
    ndarray, shape (N,)
    """
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    h = float(step)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])

    def d(e, comp):
        f = lambda s: np.asarray(field(X + s * e), dtype=float).reshape(-1, 2)[:, comp]
        return (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)

    return d(ex, 0) + d(ey, 1)


def finite_difference_cross_hessian(k, a, b, step):
    """Second-order central estimate of ``d^2 k / da_i db_j`` for a scalar kernel.

    Returns a 2x2 array ``H[i, j]``.  Independent of any closed form; used as the
    oracle for the incompressible kernel.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = float(step)
    E = np.eye(2) * h
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            H[i, j] = (
                k(a + E[i], b + E[j])
                - k(a + E[i], b - E[j])
                - k(a - E[i], b + E[j])
                + k(a - E[i], b - E[j])
            ) / (4 * h * h)
    return H


def incompressible_from_hessian(H):
    """Map ``d^2 k / da_i db_j`` to ``D(a) k D(b)^T`` with ``D = [d/dy, -d/dx]^T``."""
    return np.array([[H[1, 1], -H[1, 0]], [-H[0, 1], H[0, 0]]])

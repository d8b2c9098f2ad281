"""Scalar inner kernel, the 2x2 incompressible kernel built from it, and Gram assembly.

The incompressible kernel applies the operator ``D(x) = [d/dy, -d/dx]^T`` to both
arguments of a scalar kernel ``k``::

    K(a, b) = D(a) k(a, b) D(b)^T

so every column of ``K(., b)`` is the rotated gradient of a scalar stream
function and therefore has zero divergence.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters of the squared-exponential inner kernel.

    Attributes
    ----------
    length_scale : float
        Correlation length, in the same units as positions.
    signal_scale : float
        Kernel amplitude ``sigma_ker`` (flow-speed units).
    jitter : float
        Regularisation multiplier; the ridge actually added to a Gram matrix
        is ``jitter * signal_scale**2 / length_scale**2``.
    """

    length_scale: float = 1.0
    signal_scale: float = 1.0
    jitter: float = 1e-6

    def __post_init__(self):
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if not (np.isfinite(self.signal_scale) and self.signal_scale > 0):
            raise ValueError(f"signal_scale must be positive, got {self.signal_scale}")
        if not (np.isfinite(self.jitter) and self.jitter >= 0):
            raise ValueError(f"jitter must be non-negative, got {self.jitter}")

    @property
    def diagonal_scale(self):
        """``sigma_ker**2 / length_scale**2``, the diagonal of ``K(a, a)``."""
        return self.signal_scale**2 / self.length_scale**2

    @property
    def ridge(self):
        return self.jitter * self.diagonal_scale

    def to_dict(self):
        return {
            "length_scale": self.length_scale,
            "signal_scale": self.signal_scale,
            "jitter": self.jitter,
        }


class SquaredExponential:
    """``k(a, b) = s^2 exp(-|b - a|^2 / (2 l^2))`` and its mixed second partials.

    This is the inner-kernel seam: any object exposing ``value`` and
    ``cross_hessian`` with the same signatures can be passed to :func:`gram`.
    """

    def value(self, dx, dy, cfg):
        r2 = dx * dx + dy * dy
        return cfg.signal_scale**2 * np.exp(-r2 / (2.0 * cfg.length_scale**2))

    def cross_hessian(self, dx, dy, cfg):
        """Return ``(k_xx', k_xy', k_yy')`` where ``k_ij' = d^2 k / da_i db_j``.

        With ``d = a - b`` the SE kernel gives
        ``d^2k/da_i db_j = k (delta_ij / l^2 - d_i d_j / l^4)``.
        """
        k = self.value(dx, dy, cfg)
        l2 = cfg.length_scale**2
        l4 = l2 * l2
        kxx = k * (1.0 / l2 - dx * dx / l4)
        kyy = k * (1.0 / l2 - dy * dy / l4)
        kxy = -k * dx * dy / l4
        return kxx, kxy, kyy


SE = SquaredExponential()


def as_positions(P):
    """Coerce to a float array of shape ``(N, 2)``; a single point becomes ``(1, 2)``."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidGeometryError(f"positions must have shape (N, 2), got {P.shape}")
    if P.shape[0] == 0:
        raise InvalidGeometryError("position list is empty")
    return P


def se_kernel(a, b, cfg):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    return float(SE.value(d[0], d[1], cfg))


def _blocks(dx, dy, cfg, inner):
    kxx, kxy, kyy = inner.cross_hessian(dx, dy, cfg)
    # D(a) = [d/dy, -d/dx]^T on a, same on b
    k11 = kyy
    k12 = -kxy
    k21 = -kxy
    k22 = kxx
    return k11, k12, k21, k22


def incompressible_kernel(a, b, cfg, inner=SE):
    """The 2x2 matrix ``K(a, b)`` for a single pair of positions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b
    k11, k12, k21, k22 = _blocks(d[0], d[1], cfg, inner)
    return np.array([[k11, k12], [k21, k22]], dtype=float)


def gram(P, Q, cfg, inner=SE):
    """Block Gram matrix of shape ``(2 N_P, 2 N_Q)``.

    Block ``(i, j)`` is ``K(P[i], Q[j])``; rows and columns are interleaved
    ``(u, v)`` per position, matching the ``[u1, v1, u2, v2, ...]`` layout of
    vectorised flow fields.
    """
    P = as_positions(P)
    Q = as_positions(Q)
    dx = P[:, 0, None] - Q[None, :, 0]
    dy = P[:, 1, None] - Q[None, :, 1]
    k11, k12, k21, k22 = _blocks(dx, dy, cfg, inner)
    n_p, n_q = dx.shape
    G = np.empty((n_p, 2, n_q, 2))
    G[:, 0, :, 0] = k11
    G[:, 0, :, 1] = k12
    G[:, 1, :, 0] = k21
    G[:, 1, :, 1] = k22
    return G.reshape(2 * n_p, 2 * n_q)

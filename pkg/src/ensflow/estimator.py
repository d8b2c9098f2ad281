"""Online refinement of basis weights from point measurements.

The flow field is static, so the weight vector follows ``w_k = w_{k-1}`` and a
measurement at ``x_k`` obeys ``z_k = H(x_k) w_k + n_k``.  A Kalman filter with
identity transition and a Joseph-form covariance update processes one
measurement in time independent of how many came before.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateInnovationError, InsufficientMembersError, UnderdeterminedError
from .kernels import as_positions


def _freeze(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Immutable snapshot of the weight estimate.

    ``update`` returns a new object, so a reader holding a state always sees a
    consistent ``(w, P)`` pair.
    """

    w: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        P = np.asarray(self.P, dtype=float)
        if P.shape != (w.size, w.size):
            raise ValueError(f"covariance shape {P.shape} does not match {w.size} weights")
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "P", _freeze(P))

    def to_json(self):
        return json.dumps({"w": self.w.tolist(), "P": self.P.tolist(), "k": int(self.k)})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(np.asarray(doc["w"], float), np.asarray(doc["P"], float), int(doc["k"]))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Noisy flow vector ``value`` observed at ``position`` with noise covariance ``noise``."""

    position: np.ndarray
    value: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        x = as_positions(self.position)[0]
        z = np.asarray(self.value, dtype=float).reshape(2)
        R = np.asarray(self.noise, dtype=float)
        if R.ndim == 0:
            R = float(R) * np.eye(2)
        if R.shape != (2, 2):
            raise ValueError(f"noise covariance must be 2x2, got {R.shape}")
        if not np.allclose(R, R.T):
            raise ValueError("noise covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(R)) < -1e-12 * max(1.0, np.trace(R)):
            raise ValueError("noise covariance must be positive semidefinite")
        object.__setattr__(self, "position", _freeze(x))
        object.__setattr__(self, "value", _freeze(z))
        object.__setattr__(self, "noise", _freeze(R))


def sample_moments(W):
    """Row-wise mean and diagonal of row-wise sample variances of ``W``."""
    W = np.asarray(W, dtype=float)
    if W.shape[1] < 2:
        raise InsufficientMembersError("sample variance needs at least two columns")
    # moments about the first column: exact zeros when all columns agree
    D = W - W[:, :1]
    d = D.mean(axis=1)
    var = np.sum((D - d[:, None]) ** 2, axis=1) / (W.shape[1] - 1)
    return W[:, 0] + d, np.diag(var)


def init_from_ensemble(M):
    w0, P0 = sample_moments(M.W)
    return EstimatorState(w0, P0, 0)


def _factor_innovation(S):
    try:
        return linalg.cho_factor(S, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    eps = 1e-12 * np.trace(S)
    if eps > 0:
        try:
            return linalg.cho_factor(S + eps * np.eye(S.shape[0]), lower=True, check_finite=False)
        except linalg.LinAlgError:
            pass
    raise DegenerateInnovationError("innovation covariance is singular")


def kalman_update(mean, cov, H, z, R, process_noise=0.0):
    """One Kalman measurement update with identity transition.

    Parameters
    ----------
    mean : ndarray, shape (n,)
    cov : ndarray, shape (n, n)
    H : ndarray, shape (m, n)
    z : ndarray, shape (m,)
    R : ndarray, shape (m, m)
    process_noise : float
        Variance ``q`` of ``Q = q I`` added before the update; zero for a
        static field.

    Returns
    -------
    (ndarray, ndarray)
        Posterior mean and covariance; the covariance uses the Joseph form
        ``(I - KH) P (I - KH)^T + K R K^T``.
    """
    P = cov
    if process_noise:
        P = P + process_noise * np.eye(P.shape[0])
    PHt = P @ H.T
    S = H @ PHt + R
    S = 0.5 * (S + S.T)
    cho = _factor_innovation(S)
    K = linalg.cho_solve(cho, PHt.T, check_finite=False).T
    new_mean = mean + K @ (z - H @ mean)
    IKH = np.eye(P.shape[0]) - K @ H
    new_cov = IKH @ P @ IKH.T + K @ R @ K.T
    new_cov = 0.5 * (new_cov + new_cov.T)
    return new_mean, new_cov


def update(s, M, m, process_noise=0.0):
    """Fold one measurement into the estimate; cost is independent of ``s.k``."""
    H = M.H(m.position)
    w, P = kalman_update(s.w, s.P, H, m.value, m.noise, process_noise)
    return EstimatorState(w, P, s.k + 1)


def query(s, M, x):
    """Mean flow ``H(x) w`` and its covariance ``H(x) P H(x)^T`` (no sensor noise)."""
    H = M.H(x)
    return H @ s.w, H @ s.P @ H.T


def query_many(s, M, X):
    """Vectorised :func:`query` over ``(N, 2)`` positions."""
    Hs = M.H_stack(X)
    means = Hs @ s.w
    covs = np.einsum("nik,kl,njl->nij", Hs, s.P, Hs)
    return means, covs


def mean_field(s, M, X):
    """Estimated flow at positions ``X`` as an ``(N, 2)`` array."""
    return M.H_stack(X) @ s.w


def _whiten(H, z, R):
    L = linalg.cholesky(R, lower=True)
    return (
        linalg.solve_triangular(L, H, lower=True, check_finite=False),
        linalg.solve_triangular(L, z, lower=True, check_finite=False),
    )


def _stack(M, measurements):
    Hs = M.H_stack(np.array([m.position for m in measurements]))
    H = Hs.reshape(-1, M.n_weights)
    z = np.concatenate([m.value for m in measurements])
    R = linalg.block_diag(*[m.noise for m in measurements])
    return H, z, R


def information_solve(Hw, zw, prior=None):
    """Solve the whitened normal equations, optionally with a Gaussian prior.

    ``Hw`` and ``zw`` are measurement rows already scaled by ``R^{-1/2}``.
    Returns ``(w, P)``; raises :class:`UnderdeterminedError` without a prior if
    ``Hw`` lacks full column rank, and ``LinAlgError`` if the prior is singular.
    """
    n = Hw.shape[1]
    if prior is None:
        if Hw.shape[0] < n or np.linalg.matrix_rank(Hw) < n:
            raise UnderdeterminedError(
                f"{Hw.shape[0]} measurement rows cannot determine {n} weights"
            )
        Q, Rq = linalg.qr(Hw, mode="economic")
        w = linalg.solve_triangular(Rq, Q.T @ zw, check_finite=False)
        Rinv = linalg.solve_triangular(Rq, np.eye(n), check_finite=False)
        return w, Rinv @ Rinv.T
    w0, P0 = prior
    cho0 = linalg.cho_factor(P0, lower=True)
    A = linalg.cho_solve(cho0, np.eye(n)) + Hw.T @ Hw
    b = linalg.cho_solve(cho0, w0) + Hw.T @ zw
    choA = linalg.cho_factor(A, lower=True)
    P = linalg.cho_solve(choA, np.eye(n))
    return linalg.cho_solve(choA, b), 0.5 * (P + P.T)


def batch_ls(M, measurements, prior=None):
    """Weighted least squares over all measurements at once.

    With ``prior=(w0, P0)`` the result is the Bayesian posterior and therefore
    equals the sequential Kalman estimate.  The information form is used when
    ``P0`` and every noise covariance are positive definite; otherwise the
    batch gain form ``w0 + P0 H^T (H P0 H^T + R)^{-1} (z - H w0)``.
    """
    measurements = list(measurements)
    n = M.n_weights
    if not measurements:
        if prior is None:
            raise UnderdeterminedError("no measurements and no prior")
        return EstimatorState(prior[0], prior[1], 0)
    H, z, R = _stack(M, measurements)
    k = len(measurements)
    if prior is not None:
        w0 = np.asarray(prior[0], float)
        P0 = np.asarray(prior[1], float)
        try:
            Hw, zw = _whiten(H, z, R)
            w, P = information_solve(Hw, zw, (w0, P0))
            return EstimatorState(w, P, k)
        except linalg.LinAlgError:
            pass
        PHt = P0 @ H.T
        S = H @ PHt + R
        cho = _factor_innovation(0.5 * (S + S.T))
        K = linalg.cho_solve(cho, PHt.T, check_finite=False).T
        w = w0 + K @ (z - H @ w0)
        IKH = np.eye(n) - K @ H
        P = IKH @ P0 @ IKH.T + K @ R @ K.T
        return EstimatorState(w, 0.5 * (P + P.T), k)
    try:
        Hw, zw = _whiten(H, z, R)
    except linalg.LinAlgError:
        raise UnderdeterminedError("noise covariance must be positive definite without a prior") from None
    w, P = information_solve(Hw, zw)
    return EstimatorState(w, P, k)

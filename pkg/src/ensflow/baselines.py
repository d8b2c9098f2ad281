"""Comparison methods: kernel observer, incompressible GP, and streaming least squares.

All three share the incompressible kernel, so their mean fields are
divergence-free like ours; they differ in what they estimate and what they
recompute per measurement.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ensemble import aggregate_statistics
from .errors import IllConditionedGramError
from .estimator import EstimatorState, _whiten, information_solve, kalman_update, sample_moments
from .kernels import as_positions, gram
from .regression import MAX_ESCALATIONS


# ----------------------------------------------------------- kernel observer


@dataclass(frozen=True, eq=False)
class KernelObserverModel:
    """Kalman filter on the full ``2 N_V`` latent state (no compression)."""

    beta: np.ndarray
    P: np.ndarray
    positions: np.ndarray
    cfg: object
    k: int = 0

    def H(self, x):
        return gram(as_positions(x)[:1], self.positions, self.cfg)


def ko_init(L):
    """Mean and diagonal variance of the latent matrix rows."""
    beta, P = sample_moments(L.B)
    return KernelObserverModel(beta, P, np.asarray(L.positions), L.cfg, 0)


def ko_update(m, meas, process_noise=0.0):
    H = m.H(meas.position)
    beta, P = kalman_update(m.beta, m.P, H, meas.value, meas.noise, process_noise)
    return KernelObserverModel(beta, P, m.positions, m.cfg, m.k + 1)


def ko_query(m, x):
    H = m.H(x)
    return H @ m.beta, H @ m.P @ H.T


def ko_mean_field(m, X):
    return (gram(as_positions(X), m.positions, m.cfg) @ m.beta).reshape(-1, 2)


# -------------------------------------------------------- incompressible GP


class IncompressibleGPModel:
    """Lazy GP over measurements plus per-position ensemble pseudo-measurements.

    The ensemble enters as one pseudo-measurement per position: the member
    mean, with the 2x2 member sample covariance as its noise.  Appending a
    measurement is pure bookkeeping; the Gram matrix is factorised on the
    first query after the measurement set changes.
    """

    def __init__(self, positions, values, noises, cfg):
        self.cfg = cfg
        self._X = [np.asarray(p, float) for p in as_positions(positions)]
        self._z = [np.asarray(v, float).reshape(2) for v in values]
        self._R = [np.asarray(r, float).reshape(2, 2) for r in noises]
        self.n_prior = len(self._X)
        self.n_factorizations = 0
        self._cache = None

    def extended(self, measurements):
        """New model with extra measurements appended; nothing is factorised."""
        other = object.__new__(IncompressibleGPModel)
        other.cfg = self.cfg
        other._X = self._X + [np.asarray(m.position, float) for m in measurements]
        other._z = self._z + [np.asarray(m.value, float) for m in measurements]
        other._R = self._R + [np.asarray(m.noise, float) for m in measurements]
        other.n_prior = self.n_prior
        other.n_factorizations = 0
        other._cache = None
        return other

    def head(self, n):
        """Copy keeping the prior and the first ``n`` measurements."""
        other = self.extended([])
        keep = self.n_prior + n
        other._X, other._z, other._R = other._X[:keep], other._z[:keep], other._R[:keep]
        return other

    @property
    def n_measurements(self):
        return len(self._X) - self.n_prior

    def add(self, meas):
        self._X.append(np.asarray(meas.position, float))
        self._z.append(np.asarray(meas.value, float))
        self._R.append(np.asarray(meas.noise, float))
        self._cache = None

    def _factor(self):
        if self._cache is not None:
            return self._cache
        X = np.array(self._X)
        G = gram(X, X, self.cfg) + linalg.block_diag(*self._R)
        z = np.concatenate(self._z)
        lam = self.cfg.ridge
        n = G.shape[0]
        for attempt in range(MAX_ESCALATIONS + 1):
            try:
                cho = linalg.cho_factor(G + lam * np.eye(n), lower=True, check_finite=False)
                break
            except linalg.LinAlgError:
                if attempt == MAX_ESCALATIONS:
                    raise IllConditionedGramError(
                        "GP Gram matrix could not be factorised", condition=np.linalg.cond(G)
                    ) from None
                lam = lam * 10.0 if lam > 0 else 1e-12 * self.cfg.diagonal_scale
        self.n_factorizations += 1
        alpha = linalg.cho_solve(cho, z, check_finite=False)
        self._cache = (X, cho, alpha)
        return self._cache

    def estimate(self, x):
        X, cho, alpha = self._factor()
        Kx = gram(as_positions(x)[:1], X, self.cfg)
        mean = Kx @ alpha
        prior = gram(as_positions(x)[:1], as_positions(x)[:1], self.cfg)
        cov = prior - Kx @ linalg.cho_solve(cho, Kx.T, check_finite=False)
        return mean, 0.5 * (cov + cov.T)

    def mean_field(self, X):
        Xm, cho, alpha = self._factor()
        return (gram(as_positions(X), Xm, self.cfg) @ alpha).reshape(-1, 2)


def gp_init(E, cfg):
    mean, cov = aggregate_statistics(E)
    return IncompressibleGPModel(E.positions, mean, cov, cfg)


def gp_update(model, meas):
    model.add(meas)
    return model


def gp_estimate(model, x):
    return model.estimate(x)


# ---------------------------------------------------- streaming least squares


class LeastSquaresEstimator:
    """Re-solves the weight estimate from every stored measurement on each update.

    Shares the basis and, optionally, the ensemble prior with the Kalman
    filter, so its estimates coincide; only the cost differs, growing with the
    number of stored measurements.
    """

    def __init__(self, M, prior=None):
        self.M = M
        self.prior = prior
        self._rows = []
        self._rhs = []
        self.state = None if prior is None else EstimatorState(prior[0], prior[1], 0)

    def update(self, meas):
        Hw, zw = _whiten(self.M.H(meas.position), meas.value, meas.noise)
        self._rows.append(Hw)
        self._rhs.append(zw)
        H = np.vstack(self._rows)
        z = np.concatenate(self._rhs)
        w, P = information_solve(H, z, self.prior)
        self.state = EstimatorState(w, P, len(self._rows))
        return self.state

    def extended(self, measurements):
        """Copy holding extra measurements, without re-solving."""
        other = LeastSquaresEstimator(self.M, self.prior)
        other._rows = list(self._rows)
        other._rhs = list(self._rhs)
        for m in measurements:
            Hw, zw = _whiten(self.M.H(m.position), m.value, m.noise)
            other._rows.append(Hw)
            other._rhs.append(zw)
        other.state = self.state
        return other

    def head(self, n):
        """Copy keeping only the first ``n`` stored measurements, without re-solving."""
        other = LeastSquaresEstimator(self.M, self.prior)
        other._rows = self._rows[:n]
        other._rhs = self._rhs[:n]
        return other

    def query(self, x):
        H = self.M.H(x)
        return H @ self.state.w, H @ self.state.P @ H.T

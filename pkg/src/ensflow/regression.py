"""Offline regression: one latent state per ensemble member.

Each member's vectorised flows ``eta`` are explained as ``G beta`` with ``G``
the incompressible Gram matrix of the ensemble positions.  Dense SE Gram
matrices are badly conditioned, so the solve is ridge-stabilised,
``(G + lam I) beta = eta`` with ``lam = jitter * sigma_ker^2 / l^2``.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import IllConditionedGramError
from .kernels import gram

log = logging.getLogger(__name__)

MAX_ESCALATIONS = 4
# ridge used as the escalation seed when the configured jitter is zero
_ZERO_JITTER_SEED = 1e-12


@dataclass(frozen=True, eq=False)
class GramFactor:
    """Cholesky factor of ``G + ridge * I`` plus the ridge actually used."""

    cho: tuple
    ridge: float
    gram: np.ndarray

    def solve(self, rhs):
        return linalg.cho_solve(self.cho, rhs, check_finite=False)


def factorize(G, cfg):
    """Cholesky-factorise ``G + lam I``, escalating ``lam`` tenfold on failure."""
    G = np.asarray(G, dtype=float)
    lam = cfg.ridge
    n = G.shape[0]
    for attempt in range(MAX_ESCALATIONS + 1):
        try:
            A = G + lam * np.eye(n)
            cho = linalg.cho_factor(A, lower=True, check_finite=False)
            if not np.all(np.isfinite(cho[0])):
                raise linalg.LinAlgError("non-finite factor")
            return GramFactor(cho, lam, G)
        except linalg.LinAlgError:
            if attempt == MAX_ESCALATIONS:
                break
            old = lam
            lam = lam * 10.0 if lam > 0 else _ZERO_JITTER_SEED * cfg.diagonal_scale
            log.warning("Gram factorisation failed with ridge %.3g; retrying with %.3g", old, lam)
    cond = np.linalg.cond(G)
    raise IllConditionedGramError(
        f"Gram matrix could not be factorised (condition estimate {cond:.3g})", condition=cond
    )


@dataclass(frozen=True, eq=False)
class LatentState:
    beta: np.ndarray
    ridge: float
    residual: float  # ||eta - G beta||_inf


@dataclass(frozen=True, eq=False)
class LatentMatrix:
    """Column ``i`` of ``B`` is the latent state of member ``i``.

    Carries the positions and kernel configuration so that downstream stages
    can evaluate ``K(x, X_ens)``.
    """

    B: np.ndarray
    positions: np.ndarray
    cfg: object
    ridge: float
    residuals: np.ndarray
    member_ids: tuple

    @property
    def n_members(self):
        return self.B.shape[1]


def fit_latent(eta, G, cfg, factor=None):
    """Latent state reproducing one member: solves ``(G + lam I) beta = eta``."""
    eta = np.asarray(eta, dtype=float)
    if G.shape != (eta.size, eta.size):
        raise ValueError(f"Gram shape {G.shape} does not match data length {eta.size}")
    if factor is None:
        factor = factorize(G, cfg)
    beta = factor.solve(eta)
    residual = float(np.max(np.abs(eta - G @ beta))) if eta.size else 0.0
    return LatentState(beta, factor.ridge, residual)


def fit_all(E, cfg):
    """Fit every member against a single shared factorisation."""
    G = gram(E.positions, E.positions, cfg)
    factor = factorize(G, cfg)
    n = E.n_members
    B = np.empty((2 * E.n_positions, n))
    residuals = np.empty(n)
    for i in range(n):
        try:
            state = fit_latent(E.eta(i), G, cfg, factor=factor)
        except np.linalg.LinAlgError as exc:
            raise IllConditionedGramError(
                f"member {E.member_ids[i]!r}: {exc}", member_id=E.member_ids[i]
            ) from exc
        B[:, i] = state.beta
        residuals[i] = state.residual
    return LatentMatrix(B, np.array(E.positions), cfg, factor.ridge, residuals, E.member_ids)

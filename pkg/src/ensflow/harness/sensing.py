"""Simulated sensors: truth plus Gaussian noise."""

from dataclasses import dataclass

import numpy as np

from ..estimator import Measurement
from ..kernels import as_positions


@dataclass(frozen=True, eq=False)
class HeldOutTruth:
    """An ensemble member used as ground truth; only defined at ensemble positions.

    Calls snap each query position to the nearest ensemble position.
    """

    positions: np.ndarray
    flows: np.ndarray

    def snap(self, x):
        X = as_positions(x)
        d2 = ((X[:, None, :] - self.positions[None, :, :]) ** 2).sum(-1)
        return np.argmin(d2, axis=1)

    def __call__(self, x):
        return self.flows[self.snap(x)]


def simulate_measurement(truth, x, noise, rng):
    """``z = f(x) + n`` with ``n ~ N(0, noise)``.

    For a :class:`HeldOutTruth` the returned measurement's position is the
    snapped ensemble position.
    """
    x = as_positions(x)[0]
    if isinstance(truth, HeldOutTruth):
        x = truth.positions[truth.snap(x)[0]]
    R = np.asarray(noise, dtype=float)
    if R.ndim == 0:
        R = float(R) * np.eye(2)
    f = np.asarray(truth(x), dtype=float).reshape(2)
    if np.any(R):
        vals, vecs = np.linalg.eigh(R)
        z = f + vecs @ (np.sqrt(np.clip(vals, 0.0, None)) * rng.standard_normal(2))
    else:
        z = f.copy()
    return Measurement(x, z, R)

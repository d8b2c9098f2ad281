"""Line-survey comparison of our estimator against the KO, GP and LS baselines."""

from dataclasses import dataclass

import numpy as np

from ..baselines import LeastSquaresEstimator, gp_init, ko_init, ko_mean_field, ko_update
from ..compression import compress
from ..diagnostics import rms
from ..estimator import init_from_ensemble, mean_field, update
from ..regression import fit_all
from .sensing import simulate_measurement


@dataclass(eq=False)
class MethodOutcome:
    prior_field: np.ndarray
    post_field: np.ndarray
    rms_prior: float
    rms_post: float
    distant_rms_prior: float
    distant_rms_post: float
    field_fn: object = None


def distant_mask(X, measured, radius):
    """Positions at least ``radius`` away from every measured position."""
    d2 = ((X[:, None, :] - measured[None, :, :]) ** 2).sum(-1)
    return np.sqrt(d2.min(axis=1)) >= radius


def line_survey(scene, seed, methods=("ours", "ko", "gp", "ls")):
    """Generate an ensemble, survey along the scenario line, and score each method.

    Errors are RMS over all scalar components at the grid positions, against
    the continuous synthetic truth.  "Distant" cells lie at least three
    length scales from every measurement.
    """
    E, truth = scene.generate(seed)
    X = E.positions
    ref = truth(X)
    rng = np.random.default_rng([int(seed), 5])
    meas = [simulate_measurement(truth, x, scene.noise, rng) for x in scene.line_positions()]
    far = distant_mask(X, np.array([m.position for m in meas]), 3 * scene.kernel.length_scale)

    L = fit_all(E, scene.kernel)
    M = compress(L, scene.truncation)
    s0 = init_from_ensemble(M)
    out = {}

    def score(name, prior, post, fn):
        out[name] = MethodOutcome(
            prior, post, rms(prior, ref), rms(post, ref),
            rms(prior[far], ref[far]), rms(post[far], ref[far]), fn,
        )

    if "ours" in methods:
        s = s0
        for m in meas:
            s = update(s, M, m)
        score("ours", mean_field(s0, M, X), mean_field(s, M, X), lambda P, s=s: mean_field(s, M, P))
    if "ls" in methods:
        ls = LeastSquaresEstimator(M, prior=(s0.w, s0.P))
        for m in meas:
            ls.update(m)
        score("ls", mean_field(s0, M, X), mean_field(ls.state, M, X),
              lambda P, s=ls.state: mean_field(s, M, P))
    if "ko" in methods:
        ko = ko0 = ko_init(L)
        for m in meas:
            ko = ko_update(ko, m)
        score("ko", ko_mean_field(ko0, X), ko_mean_field(ko, X), lambda P, ko=ko: ko_mean_field(ko, P))
    if "gp" in methods:
        gp = gp_init(E, scene.kernel)
        prior = gp.mean_field(X)
        for m in meas:
            gp.add(m)
        score("gp", prior, gp.mean_field(X), gp.mean_field)
    out["_distant"] = far
    out["_model"] = M
    return out

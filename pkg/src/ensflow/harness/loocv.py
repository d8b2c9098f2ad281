"""Leave-one-out evaluation of measurement policies."""

import time
from dataclasses import dataclass, field

import numpy as np

from ..compression import compress
from ..diagnostics import rms
from ..estimator import EstimatorState, Measurement, batch_ls, init_from_ensemble, kalman_update
from ..regression import fit_all
from .policies import KINDS, PolicyConfig, default_subspace_rect, next_measurement_position
from .sensing import HeldOutTruth, simulate_measurement


@dataclass(eq=False)
class TrialReport:
    """Outcome of one policy run against one truth.

    ``rms[k]`` is the error at the ensemble positions after ``k`` measurements,
    so ``rms`` has ``n_meas + 1`` entries and ``rms[0]`` is the prior error.
    """

    policy: str
    seed: int
    holdout: str
    rms: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    update_ns: np.ndarray
    query_ns: np.ndarray
    ideal_rms: float = float("nan")
    final_field: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.positions)


def build_model(E, cfg, rule):
    """Offline stage: regression, compression, and the ensemble prior."""
    M = compress(fit_all(E, cfg), rule)
    return M, init_from_ensemble(M)


def trial_rng(seed, holdout_index, policy):
    return np.random.default_rng([int(seed), int(holdout_index), KINDS.index(policy)])


def run_policy_trial(M, s0, truth, policy, n_meas, noise, rng, eval_positions=None, truth_values=None,
                     process_noise=0.0):
    """Drive a policy for ``n_meas`` steps and record the error after each.

    ``truth`` is a callable field; when it is a :class:`HeldOutTruth` the
    policy's candidates must be ensemble positions so no snapping is needed
    for the cached ``H`` blocks.
    """
    X = M.positions if eval_positions is None else eval_positions
    H_eval = M.H_stack(X)
    ref = truth(X) if truth_values is None else truth_values
    C = policy.candidates
    H_cand = H_eval if C is X or (C.shape == X.shape and np.array_equal(C, X)) else M.H_stack(C)
    index = {tuple(c): i for i, c in enumerate(C)}

    s = s0
    errors = [rms(H_eval @ s.w, ref)]
    pos, vals, t_up, t_q = [], [], [], []
    for _ in range(n_meas):
        x = next_measurement_position(policy, s, M, rng, H_candidates=H_cand)
        m = simulate_measurement(truth, x, noise, rng)
        i = index.get(tuple(m.position))
        H = H_cand[i] if i is not None else M.H(m.position)
        t0 = time.perf_counter_ns()
        w, P = kalman_update(s.w, s.P, H, m.value, m.noise, process_noise)
        s = EstimatorState(w, P, s.k + 1)
        t1 = time.perf_counter_ns()
        est = H_eval @ s.w
        t2 = time.perf_counter_ns()
        errors.append(rms(est, ref))
        pos.append(m.position)
        vals.append(m.value)
        t_up.append(t1 - t0)
        t_q.append(t2 - t1)
    report = TrialReport(
        policy.kind,
        policy.seed,
        "",
        np.array(errors),
        np.array(pos).reshape(-1, 2),
        np.array(vals).reshape(-1, 2),
        np.array(t_up, dtype=np.int64),
        np.array(t_q, dtype=np.int64),
        final_field=H_eval @ s.w,
    )
    report.metadata["state"] = s
    return report


def ideal_rms(M, s0, truth, noise, rng):
    """Error after one noisy measurement at every ensemble position, fitted in one batch."""
    X = M.positions
    meas = [simulate_measurement(truth, x, noise, rng) for x in X]
    s = batch_ls(M, meas, prior=(s0.w, s0.P))
    return rms(M.H_stack(X) @ s.w, truth(X))


def run_loocv(E, policy, n_meas, noise, cfg, rule, holdout=0, seed=0, rect=None, model=None):
    """Hold out one member, build the model from the rest, and run a policy against it.

    Parameters
    ----------
    E : EnsembleForecast
        Needs at least three members so the reduced ensemble has a variance.
    policy : str or PolicyConfig
        A policy kind, or a full config (its candidates should be ``E.positions``).
    holdout : int or str
        Member index or id used as truth.
    rect : tuple, optional
        Subspace rectangle; defaults to :func:`default_subspace_rect`.
    model : tuple, optional
        Precomputed ``(M, s0)`` for the reduced ensemble, to share work
        between trials.
    """
    if E.n_members < 3:
        raise ValueError("leave-one-out needs at least three members")
    h = E._index(holdout)
    hid = E.member_ids[h]
    truth = HeldOutTruth(E.positions, E.flows[h])
    try:
        M, s0 = model if model is not None else build_model(E.without(h), cfg, rule)
    except Exception as exc:
        raise type(exc)(f"holdout {hid!r}: {exc}") from exc

    if isinstance(policy, PolicyConfig):
        pc = policy
        seed = pc.seed
    else:
        if policy == "subspace" and rect is None:
            rect = default_subspace_rect(M, s0)
        pc = PolicyConfig(policy, E.positions, rect, seed)
    rng = trial_rng(seed, h, pc.kind)
    report = run_policy_trial(M, s0, truth, pc, n_meas, noise, rng, truth_values=E.flows[h])
    report.holdout = hid
    report.ideal_rms = ideal_rms(M, s0, truth, noise, np.random.default_rng([int(seed), int(h), 99]))
    report.metadata.update(n_weights=M.n_weights, rect=pc.rect)
    return report


def loocv_sweep(E, policies, seeds, n_meas, noise, cfg, rule, holdouts=None):
    """All (holdout, policy, seed) combinations, reusing one model per holdout."""
    holdouts = range(E.n_members) if holdouts is None else [E._index(h) for h in holdouts]
    for h in holdouts:
        M, s0 = build_model(E.without(h), cfg, rule)
        rect = default_subspace_rect(M, s0)
        for kind in policies:
            for seed in seeds:
                yield run_loocv(E, kind, n_meas, noise, cfg, rule, holdout=h, seed=seed, rect=rect,
                                model=(M, s0))

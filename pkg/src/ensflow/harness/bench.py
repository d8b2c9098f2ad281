"""Per-update and per-query wall-time benchmarks against the number of measurements."""

import copy
import gc
import io
import time

import numpy as np

from ..baselines import LeastSquaresEstimator, gp_init, ko_init, ko_query, ko_update
from ..compression import compress
from ..estimator import init_from_ensemble, query, update
from ..regression import fit_all
from .sensing import simulate_measurement

METHODS = ("ours", "ko", "gp", "ls")


def median_of_means(samples, n_blocks=5):
    """Split repetitions into blocks, average each block, return the median block mean."""
    samples = np.asarray(samples, dtype=float)
    n_blocks = max(1, min(n_blocks, samples.shape[0]))
    blocks = np.array_split(samples, n_blocks, axis=0)
    return np.median([b.mean(axis=0) for b in blocks], axis=0)


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter_ns()
        return self

    def __exit__(self, *exc):
        self.ns = time.perf_counter_ns() - self.t0


def _measurement_stream(scenario, truth, k_max, seed):
    rng = np.random.default_rng(seed)
    g = scenario.grid
    xs = rng.uniform(g.x0, g.x1, k_max)
    ys = rng.uniform(g.y0, g.y1, k_max)
    return [simulate_measurement(truth, (x, y), scenario.noise, rng) for x, y in zip(xs, ys)]


def _scatter(items, rng):
    """Copies of ``items`` allocated in random order.

    Objects built in step order end up at addresses that track ``k``, which
    alone produces a measurable trend in timings; shuffling the allocation
    breaks that link.
    """
    out = [None] * len(items)
    for i in rng.permutation(len(items)):
        out[i] = copy.deepcopy(items[i])
    return out


def _prepare(method, E, L, M, stream, rng):
    """Per-step callables ``step(k) -> (update_ns, query_fn)`` from the pre-``k`` state.

    Our filter, LS and the GP keep cheap snapshots of the state before every
    step, so steps can be timed in any order.  The kernel observer's
    ``2 N_V x 2 N_V`` covariance is too large to snapshot per step, so it is
    only prepared sequentially (``None``).
    """
    s0 = init_from_ensemble(M)
    if method == "ours":
        states = [s0]
        for m in stream[:-1]:
            states.append(update(states[-1], M, m))
        states = _scatter(states, rng)

        def step(k, q):
            with _Timer() as t:
                s = update(states[k], M, stream[k])
            return t.ns, (lambda: query(s, M, q))
        return step
    if method == "ls":
        full = LeastSquaresEstimator(M, prior=(s0.w, s0.P)).extended(stream)

        def step(k, q):
            ls = full.head(k)
            with _Timer() as t:
                ls.update(stream[k])
            return t.ns, (lambda: ls.query(q))
        return step
    if method == "gp":
        full = gp_init(E, M.cfg).extended(stream)

        def step(k, q):
            gp = full.head(k)
            with _Timer() as t:
                gp.add(stream[k])
            return t.ns, (lambda: gp.estimate(q))
        return step
    if method == "ko":
        return None
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _timed_query(fn):
    with _Timer() as t:
        fn()
    return t.ns


def _run_method(method, E, L, M, stream, query_at, query_point, rng, order=None):
    """One repetition; returns per-step update and query times (NaN where untimed).

    ``order`` is the sequence in which steps are timed (default: a random
    permutation); the kernel observer always runs in step order.
    """
    k_max = len(stream)
    up = np.full(k_max, np.nan)
    qu = np.full(k_max, np.nan)
    if method != "ko":
        stream = _scatter(stream, rng)
    step = _prepare(method, E, L, M, stream, rng)
    if step is None:
        ko = ko_init(L)
        for k, m in enumerate(stream):
            with _Timer() as t:
                ko = ko_update(ko, m)
            up[k] = t.ns
            if query_at[k]:
                qu[k] = _timed_query(lambda: ko_query(ko, query_point))
        return up, qu
    for k in rng.permutation(k_max) if order is None else order:
        up[k], q = step(k, query_point)
        if query_at[k]:
            qu[k] = _timed_query(q)
    return up, qu


def run_timing_bench(scene, methods=METHODS, k_max=1000, reps=10, query_stride=None, seed=0, warmup=5):
    """Time updates and queries for each method as measurements accumulate.

    Parameters
    ----------
    scene : Scenario
    methods : iterable of str
        Subset of ``ours``, ``ko``, ``gp``, ``ls``.
    k_max : int
        Number of sequential measurements.
    reps : int
        Repetitions of the whole sequence, taken in antithetic pairs; per-``k``
        times are combined by :func:`median_of_means` with one block per pair.
    query_stride : dict, optional
        Per-method stride between timed queries (``k = 1`` is always timed).
        Defaults to every step except the GP, which is timed every 50 steps
        because each of its queries refactorises the full Gram matrix.

    Notes
    -----
    For every method except the kernel observer, the state before step ``k``
    is prepared up front and the steps are timed in a shuffled order, so slow
    drift of the machine does not masquerade as growth with ``k``.  Each
    shuffled repetition is followed by one in the reverse order, which cancels
    any drift that is linear in time within the pair.

    Returns
    -------
    list of dict
        Rows with keys ``method, k, update_ns, query_ns`` (``query_ns`` is NaN
        for untimed steps).
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; expected a subset of {METHODS}")
    stride = {"ours": 1, "ko": 1, "ls": 1, "gp": 50}
    stride.update(query_stride or {})
    E, truth = scene.generate(scene.seed)
    L = fit_all(E, scene.kernel)
    M = compress(L, scene.truncation)
    stream = _measurement_stream(scene, truth, k_max, seed)
    query_point = np.array([0.5 * (scene.grid.x0 + scene.grid.x1), 0.5 * (scene.grid.y0 + scene.grid.y1)])
    ks = np.arange(1, k_max + 1)

    rows = []
    for method in methods:
        q_at = (ks % stride[method] == 0) | (ks == 1)
        order_rng = np.random.default_rng([int(seed), METHODS.index(method)])
        _run_method(method, E, L, M, stream[:warmup], q_at[:warmup], query_point, order_rng)
        ups, qus = [], []
        gc_was = gc.isenabled()
        gc.disable()
        try:
            for r in range(reps):
                order = order_rng.permutation(k_max) if r % 2 == 0 else order[::-1]
                up, qu = _run_method(method, E, L, M, stream, q_at, query_point, order_rng, order)
                ups.append(up)
                qus.append(qu)
        finally:
            if gc_was:
                gc.enable()
        n_blocks = max(1, reps // 2)
        up = median_of_means(ups, n_blocks)
        qu = median_of_means(qus, n_blocks)
        for k in range(k_max):
            rows.append({"method": method, "k": k + 1, "update_ns": up[k], "query_ns": qu[k]})
    return rows


def bench_csv(rows):
    out = io.StringIO()
    out.write("method,k,update_ns,query_ns\n")
    for r in rows:
        q = "" if np.isnan(r["query_ns"]) else f"{r['query_ns']:.0f}"
        out.write(f"{r['method']},{r['k']},{r['update_ns']:.0f},{q}\n")
    return out.getvalue()

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensflow.ensemble import EnsembleForecast, GridSpec
from ensflow.errors import IllConditionedGramError
from ensflow.kernels import KernelConfig, gram
from ensflow.regression import factorize, fit_all, fit_latent


def spaced_grid(ell, spacing_in_ell, n=5):
    h = spacing_in_ell * ell
    return GridSpec(0, h * (n - 1), n, 0, h * (n - 1), n).points()


def test_zero_data_gives_zero_state(unit_cfg):
    X = spaced_grid(1.0, 1.0)
    G = gram(X, X, unit_cfg)
    st_ = fit_latent(np.zeros(2 * len(X)), G, unit_cfg)
    np.testing.assert_array_equal(st_.beta, 0.0)
    assert st_.residual == 0.0


def test_small_jitter_reproduces_data_on_separated_grid(rng):
    cfg = KernelConfig(1.0, 1.0, jitter=1e-8)
    X = spaced_grid(1.0, 2.0)
    G = gram(X, X, cfg)
    eta = rng.normal(size=2 * len(X))
    st_ = fit_latent(eta, G, cfg)
    assert np.max(np.abs(eta - G @ st_.beta)) <= 1e-6 * np.max(np.abs(eta))
    assert st_.residual == pytest.approx(np.max(np.abs(eta - G @ st_.beta)))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.integers(0, 2**31 - 1))
def test_regularised_system_is_solved(spacing, seed):
    cfg = KernelConfig(1.0, 1.0, jitter=1e-6)
    X = spaced_grid(1.0, spacing, n=6)
    G = gram(X, X, cfg)
    eta = np.random.default_rng(seed).normal(size=2 * len(X))
    st_ = fit_latent(eta, G, cfg)
    resid = (G + st_.ridge * np.eye(len(eta))) @ st_.beta - eta
    assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(eta)


def test_latent_length_matches_positions(latent):
    assert latent.B.shape == (338, 20)
    assert latent.n_members == 20


def test_fit_all_reconstructs_members(synthetic, latent, scene):
    E = synthetic[0]
    G = gram(E.positions, E.positions, scene.kernel)
    recon = G @ latent.B
    assert np.max(np.abs(recon - E.data_matrix())) <= 1e-6 * np.max(np.abs(E.flows))


def test_shared_factor_matches_individual_fits(synthetic, latent, scene):
    E = synthetic[0]
    G = gram(E.positions, E.positions, scene.kernel)
    for i in (0, 7, 19):
        np.testing.assert_array_equal(fit_latent(E.eta(i), G, scene.kernel).beta, latent.B[:, i])


def test_identical_members_identical_columns(unit_cfg):
    X = spaced_grid(1.0, 1.0, n=3)
    flows = np.tile(np.random.default_rng(1).normal(size=(1, 9, 2)), (4, 1, 1))
    L = fit_all(EnsembleForecast(X, flows), unit_cfg)
    for i in range(1, 4):
        np.testing.assert_array_equal(L.B[:, i], L.B[:, 0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-8, 1e-2), st.floats(1.5, 100))
def test_more_jitter_shrinks_state(seed, jitter, factor):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-4, 4, size=(8, 2))
    lo, hi = KernelConfig(1.0, 1.0, jitter), KernelConfig(1.0, 1.0, jitter * factor)
    G = gram(X, X, lo)
    eta = rng.normal(size=16)
    b_lo = fit_latent(eta, G, lo).beta
    b_hi = fit_latent(eta, G, hi).beta
    assert np.linalg.norm(b_hi) <= np.linalg.norm(b_lo) * (1 + 1e-9)


def test_zero_jitter_escalates_and_logs(caplog):
    cfg = KernelConfig(1.0, 1.0, jitter=0.0)
    X = np.array([[0.0, 0.0], [1e-9, 0.0], [3.0, 0.0]])
    G = gram(X, X, cfg)
    with caplog.at_level(logging.WARNING, logger="ensflow.regression"):
        f = factorize(G, cfg)
    assert f.ridge > 0
    assert any("retrying" in r.message for r in caplog.records)


def test_unfactorisable_gram_reports_condition(unit_cfg):
    G = -np.eye(4) + 0.1 * np.ones((4, 4))
    with pytest.raises(IllConditionedGramError) as info:
        factorize(G, unit_cfg)
    assert info.value.condition is not None and np.isfinite(info.value.condition)


def test_dimension_mismatch(unit_cfg):
    with pytest.raises(ValueError):
        fit_latent(np.zeros(4), np.eye(6), unit_cfg)

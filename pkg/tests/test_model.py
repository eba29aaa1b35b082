import math

import numpy as np
import pytest

from gameput import make_model, psi, psi_plus_delta


def test_drift_is_rate_minus_half_variance(fig1_model):
    assert fig1_model.mu == pytest.approx(0.008750, abs=1e-15)
    assert make_model(1, 0.0, 1.0, 1.0, 0.1).mu == -0.5
    # long-maturity parameter set is accepted
    make_model(20, 0.02, 0.15, 10, 1.0)


def test_drift_recomputed_not_stored(fig1_model):
    assert fig1_model.mu == fig1_model.r - 0.5 * fig1_model.kappa ** 2


@pytest.mark.parametrize("bad", [
    dict(K=0.0), dict(K=-1.0), dict(kappa=0.0), dict(kappa=-0.1),
    dict(T=0.0), dict(T=-1.0), dict(r=-0.01), dict(delta=-0.1),
])
def test_invalid_parameters_rejected(bad):
    params = dict(K=20.0, r=0.02, kappa=0.15, T=0.5, delta=0.15)
    params.update(bad)
    with pytest.raises(ValueError):
        make_model(**params)


def test_put_payoff_values(fig1_model):
    m = fig1_model
    ln_k = m.log_strike
    assert psi(m, ln_k) == pytest.approx(0.0, abs=1e-13)
    assert psi(m, math.log(m.K / 2)) == pytest.approx(m.K / 2, abs=1e-12)
    assert psi(m, ln_k + 5.0) == 0.0
    xs = np.linspace(ln_k - 2, ln_k + 2, 7)
    assert psi(m, xs).shape == xs.shape


def test_cancellation_payoff(fig1_model):
    m = fig1_model
    ln_k = m.log_strike
    assert psi_plus_delta(m, ln_k) == pytest.approx(0.15, abs=1e-13)
    m0 = make_model(m.K, m.r, m.kappa, m.T, 0.0)
    xs = np.linspace(ln_k - 1, ln_k + 1, 11)
    assert np.array_equal(psi_plus_delta(m0, xs), psi(m0, xs))
    m1 = make_model(m.K, m.r, m.kappa, m.T, 1.0)
    assert psi_plus_delta(m1, math.log(m.K / 2)) == pytest.approx(m.K / 2 + 1.0, abs=1e-12)


def test_payoff_dominated_by_cancellation(fig1_model):
    xs = np.linspace(1.0, 4.5, 101)
    gap = psi_plus_delta(fig1_model, xs) - psi(fig1_model, xs)
    assert np.allclose(gap, fig1_model.delta, rtol=0.0, atol=1e-12)
    assert np.all(gap > 0.0)


def test_payoff_convex_in_price(fig1_model):
    rng = np.random.default_rng(7)
    spots = rng.uniform(5.0, 40.0, size=(200, 2))
    lo, hi = spots.min(axis=1), spots.max(axis=1)
    lam = rng.uniform(0.0, 1.0, 200)
    mid = lam * lo + (1 - lam) * hi
    v_mid = psi(fig1_model, np.log(mid))
    chord = lam * psi(fig1_model, np.log(lo)) + (1 - lam) * psi(fig1_model, np.log(hi))
    assert np.all(v_mid <= chord + 1e-12)

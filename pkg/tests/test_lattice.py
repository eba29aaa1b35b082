import math

import numpy as np
import pytest

from gameput import (
    RegionFlag,
    discrete_operator_D,
    dynkin_backward,
    enumerate_dynkin_oracle,
    enumerate_stopping_oracle,
    make_lattice,
    make_model,
    make_psi_exercise,
    martingale_decomposition_check,
    node_logprice,
    node_logprice_undrifted,
    optimal_stopping_backward,
)


def const(value):
    return lambda j, ks: np.full(len(ks), value)


def test_node_logprice(fig1_model):
    lat = make_lattice(fig1_model, 4, 3.0)
    h = lat.h
    mu = fig1_model.mu
    assert node_logprice(lat, 0, 0) == 3.0
    assert node_logprice(lat, 2, 0) == pytest.approx(3.0 + 2 * mu * h, abs=1e-15)
    lat1 = make_lattice(fig1_model, 1, 3.0)
    expected = 3.0 + 0.004375 + 0.15 * math.sqrt(0.5)
    assert node_logprice(lat1, 1, 1) == pytest.approx(expected, abs=1e-12)
    assert node_logprice_undrifted(lat, 3, -1) == pytest.approx(3.0 - lat.dx, abs=1e-15)


@pytest.mark.parametrize("j,k", [(5, 1), (-1, 0), (2, 1), (1, 0), (3, 5)])
def test_invalid_nodes_rejected(fig1_model, j, k):
    lat = make_lattice(fig1_model, 4, 3.0)
    with pytest.raises(ValueError):
        node_logprice(lat, j, k)


def test_discrete_operator_on_simple_functions():
    h, kappa = 0.01, 0.3
    assert discrete_operator_D(lambda t, x: 5.0, 0.2, 1.0, h, kappa) == 0.0
    assert discrete_operator_D(lambda t, x: x, 0.2, 1.0, h, kappa) == pytest.approx(0.0, abs=1e-16)
    assert discrete_operator_D(lambda t, x: x * x, 0.2, 1.0, h, kappa) == pytest.approx(kappa ** 2 * h, rel=1e-12)
    assert discrete_operator_D(lambda t, x: t, 0.2, 1.0, h, kappa) == pytest.approx(h, rel=1e-12)


def test_discrete_operator_exact_on_quadratics():
    # a + b x + c t + d x^2 maps to h (c + kappa^2 d) exactly
    h, kappa = 0.004, 0.22
    a, b, c, d = 1.3, -0.7, 2.1, 0.9
    u = lambda t, x: a + b * x + c * t + d * x * x
    got = discrete_operator_D(u, 0.35, 0.8, h, kappa)
    want = h * (c + kappa ** 2 * d)
    assert got == pytest.approx(want, rel=1e-14)


def test_martingale_decomposition_residuals(fig1_model):
    lat = make_lattice(fig1_model, 16, 3.0)
    h = lat.h
    assert martingale_decomposition_check(lambda t, x: np.ones_like(np.asarray(x, dtype=float)), lat, 4 * h) == 0.0
    assert martingale_decomposition_check(lambda t, x: x + 0 * t, lat, 3 * h) <= 1e-13
    u = lambda t, x: np.exp(-t) * np.sin(x)
    for j in (1, 4, 8):
        assert martingale_decomposition_check(u, lat, j * h) <= 1e-12


def test_martingale_check_input_validation(fig1_model):
    lat = make_lattice(fig1_model, 30, 3.0)
    with pytest.raises(ValueError):
        martingale_decomposition_check(lambda t, x: x, lat, 25 * lat.h)  # beyond enumeration cap
    with pytest.raises(ValueError):
        martingale_decomposition_check(lambda t, x: x, lat, 2.5 * lat.h)


def test_one_step_formula(fig1_model):
    m = fig1_model
    x0 = m.log_strike
    lat = make_lattice(m, 1, x0)
    ex = make_psi_exercise(lat)
    got = optimal_stopping_backward(lat, ex).root_value
    up = x0 + m.mu * lat.h + lat.dx
    dn = x0 + m.mu * lat.h - lat.dx
    payoff = lambda x: max(m.K - math.exp(x), 0.0)
    want = max(payoff(x0), math.exp(-m.r * lat.h) * 0.5 * (payoff(up) + payoff(dn)))
    assert got == pytest.approx(want, abs=1e-12)


def test_cancel_absorbs_at_root(fig1_model):
    lat = make_lattice(fig1_model, 2, fig1_model.log_strike)
    ex = make_psi_exercise(lat)
    cancel_at_root = lambda j, ks: np.full(len(ks), j == 0)
    surf = optimal_stopping_backward(lat, ex, const(5.0), cancel_at_root)
    assert surf.root_value == 5.0
    assert surf.flag(0, 0) == RegionFlag.WRITER_CANCEL


def test_backward_equals_rule_enumeration(fig1_model):
    m = fig1_model
    for n in (1, 2, 3):
        for spot in (17.0, 20.0, 23.0):
            lat = make_lattice(m, n, math.log(spot))
            ex = make_psi_exercise(lat)
            got = optimal_stopping_backward(lat, ex).root_value
            want = enumerate_stopping_oracle(lat, ex)
            assert got == pytest.approx(want, abs=1e-12)


def test_backward_with_cancel_equals_rule_enumeration(fig1_model):
    # an absorbing strip around the strike, active on the first half of the steps
    m = fig1_model
    lat = make_lattice(m, 4, m.log_strike)
    ex = make_psi_exercise(lat)

    def cancel_set(j, ks):
        xs = lat.x0 + m.mu * j * lat.h + lat.dx * ks
        return (j < 2) & (np.abs(xs - m.log_strike) < 1.5 * lat.dx)

    got = optimal_stopping_backward(lat, ex, const(m.delta), cancel_set).root_value
    want = enumerate_stopping_oracle(lat, ex, const(m.delta), cancel_set)
    assert got == pytest.approx(want, abs=1e-12)


def test_dynkin_equals_game_tree_enumeration(fig1_model):
    m = fig1_model
    for n in (1, 2, 4):
        for spot in (17.0, 20.0, 23.0):
            lat = make_lattice(m, n, math.log(spot))
            lower = make_psi_exercise(lat)
            upper = make_psi_exercise(lat, offset=m.delta)
            got = dynkin_backward(lat, lower, upper).root_value
            lo_v, hi_v = enumerate_dynkin_oracle(lat, lower, upper)
            assert lo_v == pytest.approx(hi_v, abs=1e-12)
            assert got == pytest.approx(lo_v, abs=1e-12)


def test_oracles_reject_large_trees(fig1_model):
    lat = make_lattice(fig1_model, 5, 3.0)
    ex = make_psi_exercise(lat)
    with pytest.raises(ValueError):
        enumerate_stopping_oracle(lat, ex)
    with pytest.raises(ValueError):
        enumerate_dynkin_oracle(lat, ex, make_psi_exercise(lat, offset=0.1))


def test_dynkin_without_upper_reduces_to_stopping(fig1_model):
    lat = make_lattice(fig1_model, 64, fig1_model.log_strike)
    ex = make_psi_exercise(lat)
    stop = optimal_stopping_backward(lat, ex)
    dyn = dynkin_backward(lat, ex, const(np.inf))
    for j in (0, 13, 40, 64):
        assert np.array_equal(stop.values[j], dyn.values[j])


def test_dynkin_coinciding_obstacles_pin_to_payoff(fig1_model):
    m = make_model(20, 0.02, 0.15, 0.5, 0.0)
    lat = make_lattice(m, 32, m.log_strike)
    ex = make_psi_exercise(lat)
    surf = dynkin_backward(lat, ex, ex)
    for j in range(lat.n + 1):
        assert np.array_equal(surf.values[j], ex(j, lat.level_ks(j)))


def test_dynkin_rejects_crossed_obstacles(fig1_model):
    lat = make_lattice(fig1_model, 4, 3.0)
    with pytest.raises(ValueError, match="obstacle ordering"):
        dynkin_backward(lat, const(1.0), const(0.5))


def test_stopping_value_dominates_exercise(fig1_model):
    lat = make_lattice(fig1_model, 60, 3.0)
    wavy = lambda j, ks: 1.5 + np.sin(0.9 * j + 0.4 * ks)
    surf = optimal_stopping_backward(lat, wavy)
    for j in range(lat.n + 1):
        assert np.all(surf.values[j] >= wavy(j, lat.level_ks(j)) - 1e-15)


def test_dynkin_sandwiched_between_obstacles(fig1_model):
    lat = make_lattice(fig1_model, 60, fig1_model.log_strike)
    lower = make_psi_exercise(lat)
    upper = make_psi_exercise(lat, offset=fig1_model.delta)
    surf = dynkin_backward(lat, lower, upper)
    for j in range(lat.n):
        ks = lat.level_ks(j)
        assert np.all(surf.values[j] >= lower(j, ks) - 1e-14)
        assert np.all(surf.values[j] <= upper(j, ks) + 1e-14)


def test_obstacle_monotonicity(fig1_model):
    # lifting either obstacle never lowers the value surface
    rng = np.random.default_rng(11)
    lat = make_lattice(fig1_model, 40, fig1_model.log_strike)
    lower = make_psi_exercise(lat)
    upper = make_psi_exercise(lat, offset=fig1_model.delta)
    bumps = {j: rng.uniform(0.0, 0.05, j + 1) for j in range(lat.n + 1)}
    base = dynkin_backward(lat, lower, upper)
    lifted_up = dynkin_backward(lat, lower, lambda j, ks: upper(j, ks) + bumps[j])
    lifted_lo = dynkin_backward(lat, lambda j, ks: lower(j, ks) + 0.5 * bumps[j],
                                lambda j, ks: upper(j, ks) + bumps[j])
    for j in range(lat.n + 1):
        assert np.all(lifted_up.values[j] >= base.values[j] - 1e-15)
        assert np.all(lifted_lo.values[j] >= base.values[j] - 1e-15)


def test_rolling_mode_matches_full_surface(fig1_model):
    lat = make_lattice(fig1_model, 200, fig1_model.log_strike)
    ex = make_psi_exercise(lat)
    full = optimal_stopping_backward(lat, ex)
    rolled = optimal_stopping_backward(lat, ex, keep_surface=False)
    assert rolled.root_value == full.root_value
    assert rolled.values is None and rolled.flags is None


def test_terminal_flags_and_tie_flags(fig1_model):
    lat = make_lattice(fig1_model, 3, fig1_model.log_strike)
    ex = make_psi_exercise(lat)
    surf = optimal_stopping_backward(lat, ex)
    assert all(f == RegionFlag.TERMINAL for f in surf.flags[3])
    # constant-zero payoff: exercise never strictly beats continuation
    zero = optimal_stopping_backward(lat, const(0.0))
    for j in range(3):
        assert all(RegionFlag(int(f)) == RegionFlag.CONTINUE for f in zero.flags[j])

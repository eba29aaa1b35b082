from dataclasses import dataclass

import pytest

from gameput import (
    ModelSpec,
    ReferenceValue,
    make_lattice,
    make_model,
    make_psi_exercise,
    optimal_stopping_backward,
    price_dynkin,
    sample,
    solve_american_vi,
    solve_game_vi,
)
from gameput.pde import default_domain

# Headline contract from the worked computations: K=20, r=2%, vol 15%,
# half-year maturity, penalty 0.15.
FIG1 = dict(K=20.0, r=0.02, kappa=0.15, T=0.5, delta=0.15)


@pytest.fixture(scope="session")
def fig1_model() -> ModelSpec:
    return make_model(**FIG1)


@pytest.fixture(scope="session")
def x0_atm(fig1_model) -> float:
    return fig1_model.log_strike


@pytest.fixture(scope="session")
def dynkin2000(fig1_model, x0_atm):
    return price_dynkin(fig1_model, 2000, x0_atm)


@pytest.fixture(scope="session")
def american2000(fig1_model, x0_atm):
    lattice = make_lattice(fig1_model, 2000, x0_atm)
    return optimal_stopping_backward(lattice, make_psi_exercise(lattice))


@dataclass
class PdeBundle:
    coarse: object
    fine: object
    reference: ReferenceValue
    american_fine: object


@pytest.fixture(scope="session")
def pde_bundle(fig1_model, x0_atm) -> PdeBundle:
    """Coarse/fine double-obstacle solves plus the matching American solve,
    shared by the structural and cross-method tests."""
    x_min, x_max = default_domain(fig1_model)
    coarse = solve_game_vi(fig1_model, x_min, x_max, 641, 1281)
    fine = solve_game_vi(fig1_model, x_min, x_max, 1281, 2561)
    v_c = sample(coarse, 0.0, x0_atm)
    v_f = sample(fine, 0.0, x0_atm)
    reference = ReferenceValue(value=v_f, mesh_error=abs(v_f - v_c), x0=x0_atm,
                               nx=1281, nt=2561, coarse_value=v_c)
    american_fine = solve_american_vi(fig1_model, x_min, x_max, 1281, 2561)
    return PdeBundle(coarse=coarse, fine=fine, reference=reference, american_fine=american_fine)

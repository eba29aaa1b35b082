"""Pricing and analysis toolkit for game (Israeli) put options on binomial
lattices, with a finite-difference reference solver, free-boundary
extraction and an empirical convergence-rate harness."""

from .model import LogPrice, ModelSpec, make_model, psi, psi_plus_delta
from .lattice import (
    LatticeSpec,
    RegionFlag,
    ValueSurface,
    discrete_operator_D,
    dynkin_backward,
    enumerate_dynkin_oracle,
    enumerate_stopping_oracle,
    level_logprices,
    make_lattice,
    make_psi_exercise,
    martingale_decomposition_check,
    node_logprice,
    node_logprice_undrifted,
    optimal_stopping_backward,
)
from .american import (
    AmericanCurve,
    CurveMode,
    CutoffResult,
    american_curve_at_strike,
    american_put,
    beta_cutoff,
    compute_cutoff,
    delta_star,
    gamma_cutoff,
    t_delta,
)
from .game import BandSpec, GamePriceResult, classify_regions, in_band, make_band, price_dynkin, price_p1, price_p2
from .pde import PdeGrid, ReferenceValue, game_reference, sample, solve_american_vi, solve_game_vi
from .analysis import (
    BoundaryCurve,
    ErrorStudyReport,
    RegionTag,
    classify_node_region,
    error_study,
    extract_holder_boundary,
    extract_writer_region,
    holder_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]

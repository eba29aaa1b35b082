"""Game put pricers on the binomial lattice.

Three routes to the price: two band-cancellation approximations (the
writer cancels at the first entry of the drifted walk into a strip around
the strike, active before a horizon s) and the full two-obstacle min-max
recursion.  With horizon zero all of them collapse to the American put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import (
    LatticeSpec,
    RegionFlag,
    ValueSurface,
    dynkin_backward,
    make_lattice,
    make_psi_exercise,
    optimal_stopping_backward,
)
from .model import ModelSpec

CLASSIFY_TOL = 1e-10


@dataclass(frozen=True)
class BandSpec:
    """Writer's cancellation strip around the strike, active for t < horizon.

    lower = ln K - |mu| h - 2 kappa sqrt(h)
    upper = ln K + |mu| h + 2 kappa sqrt(h)
    """

    lower: float
    upper: float
    horizon: float


def make_band(model: ModelSpec, h: float, horizon: float) -> BandSpec:
    if horizon < -1e-15 or horizon > model.T * (1.0 + 1e-12):
        raise ValueError(f"band horizon {horizon} outside [0, T]")
    half = abs(model.mu) * h + 2.0 * model.kappa * math.sqrt(h)
    ln_k = model.log_strike
    return BandSpec(lower=ln_k - half, upper=ln_k + half, horizon=horizon)


def in_band(model: ModelSpec, h: float, j: int, x_undrifted, band: BandSpec):
    """Strict band test at lattice time j*h for the drifted position
    mu*j*h + x_undrifted.  Scalar or vector in x_undrifted."""
    if j * h >= band.horizon:
        return np.zeros_like(np.asarray(x_undrifted, dtype=float), dtype=bool) \
            if np.ndim(x_undrifted) else False
    pos = model.mu * j * h + np.asarray(x_undrifted, dtype=float)
    hit = (band.lower < pos) & (pos < band.upper)
    return hit if np.ndim(x_undrifted) else bool(hit)


@dataclass
class GamePriceResult:
    value: float
    beta_n: float
    variant: str
    surface: Optional[ValueSurface] = None


def _check_horizon(model: ModelSpec, n: int, s: float) -> None:
    h = model.T / n
    if s < 0.0 or s > model.T * (1.0 + 1e-12):
        raise ValueError(f"horizon s={s} outside [0, T]")
    if abs(s / h - round(s / h)) > 1e-9:
        raise ValueError(f"horizon s={s} is not a multiple of the step h={h}; "
                         "round it through a cutoff computation first")


def _band_cancel_set(lattice: LatticeSpec, band: BandSpec):
    h = lattice.h
    model = lattice.model

    def cancel_set(j: int, ks: np.ndarray) -> np.ndarray:
        x_und = lattice.x0 + lattice.dx * ks
        return in_band(model, h, j, x_und, band)

    return cancel_set


def price_p1(
    model: ModelSpec,
    n: int,
    x0: float,
    s: float,
    keep_surface: bool = True,
    printed_exterior_payoff: bool = False,
) -> GamePriceResult:
    """First band approximation.

    Cancellation pays the flat penalty when the start is at or below the
    strike; from above the strike it pays delta - K*e*(|mu| h + 2 kappa
    sqrt(h)), the proof-side constant.  printed_exterior_payoff switches to
    the literal exponent delta - K*exp(|mu| sqrt(h) + kappa h) instead.
    """
    _check_horizon(model, n, s)
    lattice = make_lattice(model, n, x0)
    h = lattice.h
    exercise = make_psi_exercise(lattice)
    if x0 <= model.log_strike:
        cancel_value = model.delta
    elif printed_exterior_payoff:
        cancel_value = model.delta - model.K * math.exp(abs(model.mu) * math.sqrt(h) + model.kappa * h)
    else:
        lam = abs(model.mu) * h + 2.0 * model.kappa * math.sqrt(h)
        cancel_value = model.delta - model.K * math.e * lam

    def cancel_payoff(j: int, ks: np.ndarray) -> np.ndarray:
        return np.full(len(ks), cancel_value)

    band = make_band(model, h, s)
    surface = optimal_stopping_backward(
        lattice, exercise, cancel_payoff, _band_cancel_set(lattice, band), keep_surface=keep_surface
    )
    return GamePriceResult(value=surface.root_value, beta_n=s, variant="P1",
                           surface=surface if keep_surface else None)


def price_p2(model: ModelSpec, n: int, x0: float, s: float, keep_surface: bool = True) -> GamePriceResult:
    """Second band approximation: cancellation pays the local put payoff
    plus the penalty at every band node, for every start."""
    _check_horizon(model, n, s)
    lattice = make_lattice(model, n, x0)
    exercise = make_psi_exercise(lattice)

    def cancel_payoff(j: int, ks: np.ndarray) -> np.ndarray:
        return exercise(j, ks) + model.delta

    band = make_band(model, lattice.h, s)
    surface = optimal_stopping_backward(
        lattice, exercise, cancel_payoff, _band_cancel_set(lattice, band), keep_surface=keep_surface
    )
    return GamePriceResult(value=surface.root_value, beta_n=s, variant="P2",
                           surface=surface if keep_surface else None)


def price_dynkin(model: ModelSpec, n: int, x0: float, keep_surface: bool = True) -> GamePriceResult:
    """Full binomial min-max value with obstacles psi and psi + delta."""
    lattice = make_lattice(model, n, x0)
    lower = make_psi_exercise(lattice)
    upper = make_psi_exercise(lattice, offset=model.delta)
    surface = dynkin_backward(lattice, lower, upper, keep_surface=keep_surface)
    beta_n = 0.0
    if keep_surface:
        for j in range(n - 1, -1, -1):
            if np.any(surface.flags[j] == RegionFlag.WRITER_CANCEL):
                beta_n = j * lattice.h
                break
    else:
        beta_n = float("nan")
    return GamePriceResult(value=surface.root_value, beta_n=beta_n, variant="DYNKIN",
                           surface=surface if keep_surface else None)


def classify_regions(result: GamePriceResult) -> list:
    """Re-derive region flags from values against the two obstacles.

    A node is HOLDER_STOP when the value sits on the put payoff within
    1e-10*K, WRITER_CANCEL when it sits on payoff + delta (holder wins
    when the obstacles coincide), CONTINUE otherwise; terminal nodes are
    TERMINAL.
    """
    if result.surface is None:
        raise ValueError("region classification needs a stored surface")
    surface = result.surface
    lattice = surface.lattice
    model = lattice.model
    tol = CLASSIFY_TOL * model.K
    exercise = make_psi_exercise(lattice)

    out = []
    for j in range(lattice.n + 1):
        vj = surface.values[j]
        if j == lattice.n:
            out.append(np.full(j + 1, RegionFlag.TERMINAL, dtype=np.int8))
            continue
        lo = exercise(j, lattice.level_ks(j))
        fl = np.full(j + 1, RegionFlag.CONTINUE, dtype=np.int8)
        fl[np.abs(vj - (lo + model.delta)) <= tol] = RegionFlag.WRITER_CANCEL
        fl[np.abs(vj - lo) <= tol] = RegionFlag.HOLDER_STOP
        out.append(fl)
    return out

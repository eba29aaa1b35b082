"""Finite-difference reference solver for the continuous game put value.

Backward implicit-Euler time stepping in log-price with a projected SOR
solve per step keeps the value between the put payoff and payoff + delta
(single obstacle for the American variant).  The solver's role is accuracy
through mesh refinement, so the unconditionally stable first-order scheme
is preferred over higher temporal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import ModelSpec, psi

PSOR_OMEGA = 1.5
PSOR_TOL = 1e-10
PSOR_MAX_ITER = 10_000


@njit(cache=True)
def _psor_sweeps(v, rhs, lo, hi, a, b, c, omega, tol, max_iter):
    """Projected SOR on the interior of a constant-coefficient tridiagonal
    system, clamping into [lo, hi].  Returns the sweep count, or -1 if the
    iteration cap is hit."""
    nx = v.shape[0]
    for it in range(max_iter):
        err = 0.0
        for i in range(1, nx - 1):
            gs = (rhs[i] - a * v[i - 1] - c * v[i + 1]) / b
            vn = v[i] + omega * (gs - v[i])
            if vn < lo[i]:
                vn = lo[i]
            elif vn > hi[i]:
                vn = hi[i]
            d = vn - v[i]
            if d < 0.0:
                d = -d
            if d > err:
                err = d
            v[i] = vn
        if err <= tol:
            return it + 1
    return -1


@dataclass
class PdeGrid:
    """Solved obstacle problem on a (time, log-price) rectangle.

    values[i, j] approximates the option value at (t[i], x[j]); row nt-1 is
    the terminal payoff.  lower/upper are the obstacle arrays over x.
    """

    model: ModelSpec
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def row_at(self, t: float) -> np.ndarray:
        """Value profile at time t, linearly blended between grid rows."""
        if t < self.t[0] - 1e-12 or t > self.t[-1] + 1e-12:
            raise ValueError(f"t={t} outside grid range [{self.t[0]}, {self.t[-1]}]")
        i = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2))
        w = (t - self.t[i]) / (self.t[i + 1] - self.t[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]


def default_domain(model: ModelSpec) -> tuple:
    """Truncation wide enough that boundary error is negligible:
    six standard deviations plus the drift sweep on each side."""
    pad = 6.0 * model.kappa * math.sqrt(model.T) + abs(model.mu) * model.T
    return model.log_strike - pad, model.log_strike + pad


def _solve_vi(model: ModelSpec, x_min: float, x_max: float, nx: int, nt: int,
              with_upper: bool, omega: float, tol: float, max_iter: int) -> PdeGrid:
    if nx < 16 or nt < 16:
        raise ValueError("need at least 16 points in each direction")
    guard = 3.0 * model.kappa * math.sqrt(model.T)
    if not (x_min < model.log_strike - guard and model.log_strike + guard < x_max):
        raise ValueError("domain too narrow: keep at least 3 kappa*sqrt(T) on each side of the strike")

    x = np.linspace(x_min, x_max, nx)
    t = np.linspace(0.0, model.T, nt)
    dx = x[1] - x[0]
    dt = t[1] - t[0]

    lo = np.asarray(psi(model, x))
    hi = lo + model.delta if with_upper else np.full(nx, np.inf)

    alpha = 0.5 * model.kappa ** 2 * dt / dx ** 2
    beta = 0.5 * model.mu * dt / dx
    a = -alpha + beta          # multiplies v[i-1]
    b = 1.0 + 2.0 * alpha + model.r * dt
    c = -alpha - beta          # multiplies v[i+1]

    left_bc = model.K - math.exp(x_min)
    values = np.empty((nt, nx))
    values[nt - 1] = lo
    v = lo.copy()
    for i in range(nt - 2, -1, -1):
        rhs = values[i + 1]
        v[0] = left_bc
        v[-1] = 0.0
        sweeps = _psor_sweeps(v, rhs, lo, hi, a, b, c, omega, tol, max_iter)
        if sweeps < 0:
            raise RuntimeError(
                f"projected SOR failed to reach {tol} within {max_iter} sweeps "
                f"at time step {i} (omega={omega}); refine the grid or lower omega"
            )
        values[i] = v
    return PdeGrid(model=model, x=x, t=t, values=values, lower=lo, upper=hi)


def solve_game_vi(model: ModelSpec, x_min: float, x_max: float, nx: int, nt: int,
                  omega: float = PSOR_OMEGA, tol: float = PSOR_TOL,
                  max_iter: int = PSOR_MAX_ITER) -> PdeGrid:
    """Double-obstacle solve: payoff <= value <= payoff + delta."""
    return _solve_vi(model, x_min, x_max, nx, nt, True, omega, tol, max_iter)


def solve_american_vi(model: ModelSpec, x_min: float, x_max: float, nx: int, nt: int,
                      omega: float = PSOR_OMEGA, tol: float = PSOR_TOL,
                      max_iter: int = PSOR_MAX_ITER) -> PdeGrid:
    """Single-obstacle (American) solve: value >= payoff only."""
    return _solve_vi(model, x_min, x_max, nx, nt, False, omega, tol, max_iter)


def sample(grid: PdeGrid, t: float, x: float) -> float:
    """Bilinear interpolation; exact at grid points."""
    if x < grid.x[0] - 1e-12 or x > grid.x[-1] + 1e-12:
        raise ValueError(f"x={x} outside grid range [{grid.x[0]}, {grid.x[-1]}]")
    row = grid.row_at(t)
    j = int(np.clip(np.searchsorted(grid.x, x, side="right") - 1, 0, len(grid.x) - 2))
    w = (x - grid.x[j]) / (grid.x[j + 1] - grid.x[j])
    return float((1.0 - w) * row[j] + w * row[j + 1])


@dataclass(frozen=True)
class ReferenceValue:
    """A PDE reference price together with its mesh-refinement evidence.

    mesh_error is |fine - coarse| at the sampled point, where the fine grid
    doubles the resolution while keeping the strike on-grid (2n-1 points).
    """

    value: float
    mesh_error: float
    x0: float
    nx: int
    nt: int
    coarse_value: float


def game_reference(model: ModelSpec, x0: float, nx: int, nt: int) -> ReferenceValue:
    """Solve the game problem at (nx, nt) and (2nx-1, 2nt-1) and return the
    fine-grid value at (0, x0) with the refinement disagreement attached."""
    x_min, x_max = default_domain(model)
    coarse = solve_game_vi(model, x_min, x_max, nx, nt)
    fine = solve_game_vi(model, x_min, x_max, 2 * nx - 1, 2 * nt - 1)
    v_coarse = sample(coarse, 0.0, x0)
    v_fine = sample(fine, 0.0, x0)
    return ReferenceValue(value=v_fine, mesh_error=abs(v_fine - v_coarse), x0=x0,
                          nx=2 * nx - 1, nt=2 * nt - 1, coarse_value=v_coarse)

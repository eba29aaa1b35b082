"""Free-boundary extraction, region classification and the empirical
convergence-rate harness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .american import beta_cutoff, gamma_cutoff
from .game import price_p1, price_p2
from .lattice import RegionFlag, ValueSurface, level_logprices
from .model import ModelSpec, psi
from .pde import PdeGrid, ReferenceValue

BOUNDARY_TOL = 1e-9

# Signed-corridor exponents per variant: (lower side, upper side).
CORRIDOR_EXPONENTS = {"P1": (-0.5, -0.75), "P2": (-2.0 / 3.0, -0.5)}


@dataclass
class BoundaryCurve:
    """Sampled holder exercise frontier t -> s(t) (log-price) with the
    parallel price curve b(t) = e^{s(t)}."""

    times: np.ndarray
    levels: np.ndarray

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.levels)

    def level_at(self, t: float) -> float:
        """Linear interpolation of s(t), clamped at the sampled ends."""
        return float(np.interp(t, self.times, self.levels))


def extract_holder_boundary(surface_or_grid) -> BoundaryCurve:
    """Per time level, the largest log-price below the strike whose value
    sits on the put payoff within 1e-9*K; levels with an empty stop set
    emit no sample."""
    times, levels = [], []
    if isinstance(surface_or_grid, ValueSurface):
        surface = surface_or_grid
        lattice = surface.lattice
        model = lattice.model
        tol = BOUNDARY_TOL * model.K
        ln_k = model.log_strike
        for j in range(lattice.n + 1):
            xs = level_logprices(lattice, j)
            on_payoff = (xs < ln_k) & (np.abs(surface.values[j] - psi(model, xs)) <= tol)
            if on_payoff.any():
                times.append(j * lattice.h)
                levels.append(xs[on_payoff].max())
    elif isinstance(surface_or_grid, PdeGrid):
        grid = surface_or_grid
        model = grid.model
        tol = BOUNDARY_TOL * model.K
        below = grid.x < model.log_strike
        for i in range(len(grid.t)):
            on_payoff = below & (np.abs(grid.values[i] - grid.lower) <= tol)
            if on_payoff.any():
                times.append(grid.t[i])
                levels.append(grid.x[on_payoff].max())
    else:
        raise TypeError(f"cannot extract a boundary from {type(surface_or_grid).__name__}")
    return BoundaryCurve(times=np.asarray(times), levels=np.asarray(levels))


def extract_writer_region(surface: ValueSurface) -> tuple:
    """Latest time carrying a writer-cancel flag, plus all flagged nodes.

    Returns (beta_estimate, nodes) with nodes a list of (j, k) pairs; the
    estimate is 0.0 when the region is empty (which covers both the
    high-penalty regime and the degenerate delta = 0 surface, where the
    obstacles coincide and holder flags win).  All flagged nodes must sit
    within 3 lattice cells of the strike.
    """
    lattice = surface.lattice
    model = lattice.model
    if model.delta == 0.0:
        # coinciding obstacles: every payoff node is a holder node by convention
        return 0.0, []
    nodes = []
    beta_estimate = 0.0
    for j in range(lattice.n + 1):
        if j == lattice.n:
            continue
        hits = np.nonzero(surface.flags[j] == RegionFlag.WRITER_CANCEL)[0]
        if len(hits) == 0:
            continue
        beta_estimate = j * lattice.h
        ks = lattice.level_ks(j)[hits]
        nodes.extend((j, int(k)) for k in ks)
        xs = level_logprices(lattice, j)[hits]
        off = np.max(np.abs(xs - model.log_strike))
        if off > 3.0 * 2.0 * lattice.dx:
            raise ValueError(
                f"writer-cancel node {off / (2.0 * lattice.dx):.2f} cells from the strike "
                f"at level {j}; expected the region confined to the strike"
            )
    return beta_estimate, nodes


class RegionTag(Enum):
    C = "C"  # continuation side, above the shifted boundary
    S = "S"  # stopping side, below the boundary
    B = "B"  # boundary strip between the offsets


def classify_node_region(model: ModelSpec, boundary: BoundaryCurve, h: float,
                         t: float, x: float) -> RegionTag:
    """Three-way split of (t, x) against the holder boundary with the
    one-step safety offsets |mu| h + kappa sqrt(h)."""
    off = abs(model.mu) * h + model.kappa * math.sqrt(h)
    pos = model.mu * t + x
    if pos > boundary.level_at(t + h) + off:
        return RegionTag.C
    if pos <= boundary.level_at(t) - off:
        return RegionTag.S
    return RegionTag.B


@dataclass
class ErrorStudyReport:
    """Signed errors of a band approximation against a PDE reference over a
    ladder of step counts, with the fitted log-log rate and the train/
    validate signed-corridor verdict."""

    x0: float
    variant: str
    ns: np.ndarray
    errors: np.ndarray
    fitted_rate: float
    fitted_constant: float
    corridor: tuple
    cutoff_times: np.ndarray
    values: np.ndarray
    reference: float
    mesh_error: float
    fit_floor: float
    n_fit_points: int
    corridor_constants: tuple = (float("nan"), float("nan"))
    corridor_violations: int = 0


def _fit_rate(ns: np.ndarray, errors: np.ndarray, floor: float) -> tuple:
    """Least-squares slope of log|error| vs log n, excluding entries at or
    below the reference-noise floor (and exact zeros, which have no log)."""
    usable = (np.abs(errors) > 0.0) & (np.abs(errors) >= floor)
    if usable.sum() < 2:
        return float("nan"), float("nan"), int(usable.sum())
    slope, intercept = np.polyfit(np.log(ns[usable]), np.log(np.abs(errors[usable])), 1)
    return float(slope), float(math.exp(intercept)), int(usable.sum())


def _corridor_check(ns: np.ndarray, errors: np.ndarray, exponents: tuple) -> tuple:
    """Fit one-sided constants on the two smallest n, validate on the rest.

    errors must satisfy -C_lo * n**lo_exp <= error <= C_up * n**up_exp with
    (lo_exp, up_exp) = exponents; returns ((C_lo, C_up), violations)."""
    lo_exp, up_exp = exponents
    train = slice(0, 2)
    c_up = float(np.max(np.maximum(errors[train], 0.0) * ns[train] ** (-up_exp)))
    c_lo = float(np.max(np.maximum(-errors[train], 0.0) * ns[train] ** (-lo_exp)))
    violations = 0
    for n, e in zip(ns[2:], errors[2:]):
        slack = 1e-12 * (1.0 + abs(e))
        if e > c_up * n ** up_exp + slack:
            violations += 1
        if -e > c_lo * n ** lo_exp + slack:
            violations += 1
    return (c_lo, c_up), violations


def error_study(model: ModelSpec, x0: float, variant: str, ns, reference: ReferenceValue,
                cutoff_mode: str = "beta", cutoffs: Optional[dict] = None) -> ErrorStudyReport:
    """Price the chosen approximation at every n (each paired with its own
    cutoff horizon) and report signed errors against the PDE reference.

    The reference must carry mesh-refinement evidence; rate fitting ignores
    entries below 10x the evidence, where the slope would measure oracle
    noise rather than lattice error.
    """
    if not isinstance(reference, ReferenceValue):
        raise TypeError("reference must be a ReferenceValue carrying mesh-refinement evidence")
    ns = np.asarray(list(ns), dtype=int)
    if len(ns) < 1 or np.any(np.diff(ns) <= 0):
        raise ValueError("ns must be a nonempty strictly increasing sequence")
    variant = variant.upper()
    if variant not in ("P1", "P2"):
        raise ValueError(f"variant must be P1 or P2, got {variant}")
    pricer = price_p1 if variant == "P1" else price_p2

    values = np.empty(len(ns))
    cutoff_times = np.empty(len(ns))
    for i, n in enumerate(ns):
        if cutoffs is not None and int(n) in cutoffs:
            cut = cutoffs[int(n)]
        elif cutoff_mode == "beta":
            cut = beta_cutoff(model, int(n))
        elif cutoff_mode == "gamma":
            cut = gamma_cutoff(model, int(n))
        else:
            raise ValueError(f"unknown cutoff mode {cutoff_mode!r}")
        cutoff_times[i] = cut.time
        values[i] = pricer(model, int(n), x0, cut.time, keep_surface=False).value

    errors = values - reference.value
    floor = 10.0 * reference.mesh_error
    fitted_rate, fitted_constant, n_fit = _fit_rate(ns, errors, floor)
    constants, violations = ((float("nan"), float("nan")), 0)
    if len(ns) >= 3:
        constants, violations = _corridor_check(ns, errors, CORRIDOR_EXPONENTS[variant])
    return ErrorStudyReport(
        x0=x0, variant=variant, ns=ns, errors=errors,
        fitted_rate=fitted_rate, fitted_constant=fitted_constant,
        corridor=CORRIDOR_EXPONENTS[variant],
        cutoff_times=cutoff_times, values=values,
        reference=reference.value, mesh_error=reference.mesh_error,
        fit_floor=floor, n_fit_points=n_fit,
        corridor_constants=constants, corridor_violations=violations,
    )


def holder_check(pde_grid: PdeGrid, boundary: BoundaryCurve, t1: float, t2: float,
                 x0: float, x1: float, beta: Optional[float] = None) -> tuple:
    """Both sides of the boundary continuity inequality
    (s(t1) - s(t2))^2 <= sup_{x0 <= x <= x1} |P(t1, x) - P(t2, x)|.

    Returns (lhs, rhs); callers allow a small additive slack for
    discretization.  When beta is given, t1 and t2 must lie in [0, beta].
    """
    if t2 < t1 or t1 < 0.0:
        raise ValueError(f"need 0 <= t1 <= t2, got ({t1}, {t2})")
    if beta is not None and t2 > beta + 1e-12:
        raise ValueError(f"t2={t2} beyond the writer horizon {beta}")
    lhs = (boundary.level_at(t1) - boundary.level_at(t2)) ** 2
    row1 = pde_grid.row_at(t1)
    row2 = pde_grid.row_at(t2)
    mask = (pde_grid.x >= x0) & (pde_grid.x <= x1)
    if not mask.any():
        raise ValueError(f"no grid columns inside [{x0}, {x1}]")
    rhs = float(np.max(np.abs(row1[mask] - row2[mask])))
    return float(lhs), rhs


def fit_lipschitz_in_horizon(model: ModelSpec, n: int, x0: float, variant: str,
                             s_center: float, radius_steps: int = 3) -> float:
    """Largest observed |value(s) - value(s')| / |s - s'| over horizon
    perturbations in whole steps around s_center."""
    h = model.T / n
    pricer = price_p1 if variant.upper() == "P1" else price_p2
    k_center = int(round(s_center / h))
    ks = [k for k in range(k_center - radius_steps, k_center + radius_steps + 1) if 0 <= k <= n]
    vals = {k: pricer(model, n, x0, k * h, keep_surface=False).value for k in ks}
    best = 0.0
    for i, ka in enumerate(ks):
        for kb in ks[i + 1:]:
            best = max(best, abs(vals[ka] - vals[kb]) / (abs(ka - kb) * h))
    return best

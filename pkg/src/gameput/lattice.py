"""Binomial random-walk lattice and backward-induction kernels.

The lattice discretizes the driftless walk X_j = x0 + kappa*sqrt(h)*k on
nodes (j, k), 0 <= j <= n, k in {-j, -j+2, ..., j}; payoffs are evaluated
at the drifted coordinate x0 + mu*j*h + kappa*sqrt(h)*k.

Two kernels are provided: single-obstacle optimal stopping with an
absorbing cancellation set, and the full two-player min-max recursion.
Both are exactly cross-checkable against brute-force enumeration oracles
for small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional

import numpy as np

from .model import ModelSpec

# Level callables receive (j, ks) with ks the vector of walk offsets at
# level j and return a vector of the same length.
LevelFn = Callable[[int, np.ndarray], np.ndarray]

# Region-flag tie tolerance, relative to strike.
FLAG_TOL = 1e-12

# Path enumeration caps: 2^20 paths for the martingale check, doubly
# exponential rule counts for the stopping-rule oracles.
MAX_ENUM_STEPS = 20
MAX_ORACLE_STEPS = 4


class RegionFlag(IntEnum):
    CONTINUE = 0
    HOLDER_STOP = 1
    WRITER_CANCEL = 2
    TERMINAL = 3


@dataclass(frozen=True)
class LatticeSpec:
    """An n-step binomial lattice over [0, span] started at log-price x0."""

    model: ModelSpec
    n: int
    x0: float
    span: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"step count must be >= 1, got {self.n}")
        if not self.span > 0.0:
            raise ValueError(f"lattice span must be positive, got {self.span}")

    @property
    def h(self) -> float:
        return self.span / self.n

    @property
    def dx(self) -> float:
        """Spatial step of the walk, kappa*sqrt(h)."""
        return self.model.kappa * math.sqrt(self.h)

    def level_ks(self, j: int) -> np.ndarray:
        return np.arange(-j, j + 1, 2)


def make_lattice(model: ModelSpec, n: int, x0: float, span: Optional[float] = None) -> LatticeSpec:
    return LatticeSpec(model=model, n=int(n), x0=float(x0), span=model.T if span is None else float(span))


def _check_node(lattice: LatticeSpec, j: int, k: int) -> None:
    if not 0 <= j <= lattice.n:
        raise ValueError(f"level {j} outside [0, {lattice.n}]")
    if abs(k) > j or (k - j) % 2 != 0:
        raise ValueError(f"node (j={j}, k={k}) does not exist (offset/parity)")


def node_logprice(lattice: LatticeSpec, j: int, k: int) -> float:
    """Drifted log-price x0 + mu*j*h + kappa*sqrt(h)*k at node (j, k)."""
    _check_node(lattice, j, k)
    return lattice.x0 + lattice.model.mu * j * lattice.h + lattice.dx * k


def node_logprice_undrifted(lattice: LatticeSpec, j: int, k: int) -> float:
    """Driftless walk coordinate x0 + kappa*sqrt(h)*k; the cancellation
    band test adds the drift term itself."""
    _check_node(lattice, j, k)
    return lattice.x0 + lattice.dx * k


def level_logprices(lattice: LatticeSpec, j: int) -> np.ndarray:
    """Drifted log-prices of all nodes at level j."""
    return lattice.x0 + lattice.model.mu * j * lattice.h + lattice.dx * lattice.level_ks(j)


def make_psi_exercise(lattice: LatticeSpec, offset: float = 0.0) -> LevelFn:
    """Level callable for the put payoff (K - e^x)^+ + offset at drifted nodes.

    Precomputes the spatial exponential grid once so backward inductions do
    not re-evaluate exp at every node.
    """
    model = lattice.model
    n = lattice.n
    egrid = np.exp(lattice.dx * np.arange(-n, n + 1))
    drift_factor = np.exp(model.mu * lattice.h * np.arange(n + 1))
    ex0 = math.exp(lattice.x0)

    def exercise(j: int, ks: np.ndarray) -> np.ndarray:
        if len(ks) == j + 1:
            grid = egrid[n - j:n + j + 1:2]  # full level, strided view
        else:
            grid = egrid[ks + n]
        out = grid * (-ex0 * drift_factor[j])
        out += model.K
        np.maximum(out, 0.0, out=out)
        if offset != 0.0:
            out += offset
        return out

    return exercise


@dataclass
class ValueSurface:
    """Backward-induction output: values and region flags per node.

    values[j] and flags[j] are vectors over k = -j, -j+2, ..., j.  Both are
    None in rolling mode, which keeps only the root value.
    """

    lattice: LatticeSpec
    root_value: float
    values: Optional[list]
    flags: Optional[list]

    def value(self, j: int, k: int) -> float:
        _check_node(self.lattice, j, k)
        return float(self.values[j][(k + j) // 2])

    def flag(self, j: int, k: int) -> RegionFlag:
        _check_node(self.lattice, j, k)
        return RegionFlag(int(self.flags[j][(k + j) // 2]))


def optimal_stopping_backward(
    lattice: LatticeSpec,
    exercise: LevelFn,
    cancel_payoff: Optional[LevelFn] = None,
    cancel_set: Optional[LevelFn] = None,
    keep_surface: bool = True,
) -> ValueSurface:
    """Optimal stopping value with an absorbing cancellation set.

    V(n, k) = exercise(n, k).  For j < n, nodes in cancel_set are absorbed
    at max(exercise, cancel_payoff); the max realizes the convention that a
    simultaneous stop pays the holder's claim.  Elsewhere
    V = max(exercise, e^{-r h} * (V_up + V_down) / 2).

    cancel_set is never consulted at the terminal level.  Region flags need
    a strict win beyond 1e-12*K; exact ties flag CONTINUE (or HOLDER_STOP at
    absorbed nodes, where the holder has priority).
    """
    model = lattice.model
    n = lattice.n
    disc = math.exp(-model.r * lattice.h)
    tol = FLAG_TOL * model.K
    if (cancel_payoff is None) != (cancel_set is None):
        raise ValueError("cancel_payoff and cancel_set must be given together")

    values: Optional[list] = [None] * (n + 1) if keep_surface else None
    flags: Optional[list] = [None] * (n + 1) if keep_surface else None

    v = np.asarray(exercise(n, lattice.level_ks(n)), dtype=float)
    if keep_surface:
        values[n] = v.copy()
        flags[n] = np.full(n + 1, RegionFlag.TERMINAL, dtype=np.int8)

    for j in range(n - 1, -1, -1):
        ks = lattice.level_ks(j)
        cont = v[:-1] + v[1:]
        cont *= 0.5 * disc
        ex = np.asarray(exercise(j, ks), dtype=float)
        if keep_surface:
            fl = np.where(ex > cont + tol, RegionFlag.HOLDER_STOP, RegionFlag.CONTINUE).astype(np.int8)
        vj = np.maximum(ex, cont, out=cont)
        if cancel_set is not None:
            absorbed = np.asarray(cancel_set(j, ks), dtype=bool)
            if absorbed.any():
                cp = np.asarray(cancel_payoff(j, ks), dtype=float)
                vj = np.where(absorbed, np.maximum(ex, cp), vj)
                if keep_surface:
                    fl_abs = np.where(cp > ex + tol, RegionFlag.WRITER_CANCEL,
                                      RegionFlag.HOLDER_STOP).astype(np.int8)
                    fl = np.where(absorbed, fl_abs, fl)
        if keep_surface:
            values[j] = vj
            flags[j] = fl
        v = vj

    return ValueSurface(lattice=lattice, root_value=float(v[0]), values=values, flags=flags)


def dynkin_backward(
    lattice: LatticeSpec,
    lower: LevelFn,
    upper: LevelFn,
    keep_surface: bool = True,
) -> ValueSurface:
    """Two-obstacle min-max recursion.

    V(n, k) = lower(n, k); for j < n,
    V = min(upper, max(lower, e^{-r h} * (V_up + V_down) / 2)).
    Flags mark where an obstacle binds strictly (beyond 1e-12*K);
    continuation wins ties.
    """
    model = lattice.model
    n = lattice.n
    disc = math.exp(-model.r * lattice.h)
    tol = FLAG_TOL * model.K

    values: Optional[list] = [None] * (n + 1) if keep_surface else None
    flags: Optional[list] = [None] * (n + 1) if keep_surface else None

    v = np.asarray(lower(n, lattice.level_ks(n)), dtype=float)
    if keep_surface:
        values[n] = v.copy()
        flags[n] = np.full(n + 1, RegionFlag.TERMINAL, dtype=np.int8)

    for j in range(n - 1, -1, -1):
        ks = lattice.level_ks(j)
        lo = np.asarray(lower(j, ks), dtype=float)
        up = np.asarray(upper(j, ks), dtype=float)
        if np.any(lo > up):
            i = int(np.argmax(lo - up))
            raise ValueError(
                f"obstacle ordering violated at node (j={j}, k={int(ks[i])}): "
                f"lower={lo[i]} > upper={up[i]}"
            )
        cont = v[:-1] + v[1:]
        cont *= 0.5 * disc
        raw = np.maximum(lo, cont)
        vj = np.minimum(up, raw)
        if keep_surface:
            fl = np.full(j + 1, RegionFlag.CONTINUE, dtype=np.int8)
            fl[lo > cont + tol] = RegionFlag.HOLDER_STOP
            fl[raw > up + tol] = RegionFlag.WRITER_CANCEL
            values[j] = vj
            flags[j] = fl
        v = vj

    return ValueSurface(lattice=lattice, root_value=float(v[0]), values=values, flags=flags)


def discrete_operator_D(u: Callable, t: float, x: float, h: float, kappa: float):
    """One-step discretization operator:
    D u(t, x) = [u(t+h, x+kappa*sqrt(h)) + u(t+h, x-kappa*sqrt(h))] / 2 - u(t, x).

    h * (d/dt + kappa^2/2 d2/dx2) consistency holds exactly on quadratics in x.
    """
    dx = kappa * math.sqrt(h)
    return 0.5 * (u(t + h, x + dx) + u(t + h, x - dx)) - u(t, x)


def _path_matrix(j: int) -> np.ndarray:
    """All 2^j sign paths as a (2^j, j) matrix of +/-1 steps."""
    m = 1 << j
    bits = (np.arange(m)[:, None] >> np.arange(j)[None, :]) & 1
    return 2 * bits - 1


def martingale_decomposition_check(u: Callable, lattice: LatticeSpec, t: float) -> float:
    """Residual of the discrete martingale decomposition
    E[u(t, X_t)] = u(0, x0) + E[sum_i D u((i-1)h, X_{(i-1)h})],
    computed by exact enumeration of all 2^j paths of the driftless walk.

    u must accept (t, x) with x an ndarray.  Requires t = j*h with j <= 20.
    """
    h = lattice.h
    j = int(round(t / h))
    if abs(t - j * h) > 1e-9 * max(1.0, lattice.span):
        raise ValueError(f"t={t} is not a multiple of the step h={h}")
    if j > lattice.n:
        raise ValueError(f"t={t} beyond the lattice span")
    if j > MAX_ENUM_STEPS:
        raise ValueError(f"path enumeration capped at {MAX_ENUM_STEPS} steps, got {j}")

    x0 = lattice.x0
    dx = lattice.dx
    if j == 0:
        return 0.0

    steps = _path_matrix(j)
    walk = np.empty((1 << j, j + 1))
    walk[:, 0] = x0
    walk[:, 1:] = x0 + dx * np.cumsum(steps, axis=1)

    lhs = float(np.mean(u(t, walk[:, j])))
    dsum = np.zeros(1 << j)
    for i in range(1, j + 1):
        ti = (i - 1) * h
        xi = walk[:, i - 1]
        dsum += 0.5 * (u(ti + h, xi + dx) + u(ti + h, xi - dx)) - u(ti, xi)
    rhs = float(np.asarray(u(0.0, x0))) + float(np.mean(dsum))
    return abs(lhs - rhs)


def _prefix(p: int, j: int, n: int) -> int:
    """First j steps of path p (steps packed most-significant-first)."""
    return p >> (n - j)


def _offset_of(m: int, j: int) -> int:
    """Walk offset k after the j steps encoded in history m."""
    return 2 * bin(m).count("1") - j


def enumerate_stopping_oracle(
    lattice: LatticeSpec,
    exercise: LevelFn,
    cancel_payoff: Optional[LevelFn] = None,
    cancel_set: Optional[LevelFn] = None,
) -> float:
    """Brute-force optimal stopping value for n <= 4.

    Enumerates every adapted stop/continue labeling of the non-recombined
    depth-n binary tree (one decision bit per history) and evaluates the
    expected discounted payoff path by path, honoring first entry into the
    cancellation set exactly like the backward kernel.
    """
    n = lattice.n
    if n > MAX_ORACLE_STEPS:
        raise ValueError(f"rule enumeration capped at n={MAX_ORACLE_STEPS}, got {n}")
    model = lattice.model
    h = lattice.h

    def ex_at(j: int, k: int) -> float:
        return float(np.asarray(exercise(j, np.array([k])))[0])

    n_decisions = (1 << n) - 1
    level_base = [(1 << j) - 1 for j in range(n)]
    rules = np.arange(1 << n_decisions, dtype=np.uint32)
    total = np.zeros(len(rules))

    for p in range(1 << n):
        ks = [_offset_of(_prefix(p, j, n), j) for j in range(n + 1)]
        sig = n + 1  # sentinel: never cancelled
        cval = 0.0
        if cancel_set is not None:
            for j in range(n):
                hit = bool(np.asarray(cancel_set(j, np.array([ks[j]])))[0])
                if hit:
                    sig = j
                    cval = math.exp(-model.r * h * j) * float(
                        np.asarray(cancel_payoff(j, np.array([ks[j]])))[0]
                    )
                    break
        dex = np.array([math.exp(-model.r * h * j) * ex_at(j, ks[j]) for j in range(n + 1)])

        tau = np.full(len(rules), n, dtype=np.int64)
        for j in range(n - 1, -1, -1):
            bit = np.uint32(1 << (level_base[j] + _prefix(p, j, n)))
            tau = np.where((rules & bit) != 0, j, tau)
        total += np.where(tau <= sig, dex[tau], cval)

    return float(np.max(total)) / (1 << n)


def enumerate_dynkin_oracle(
    lattice: LatticeSpec,
    lower: LevelFn,
    upper: LevelFn,
) -> tuple:
    """Brute-force min-max game value for n <= 4.

    Enumerates one player's adapted labelings exhaustively while the
    opponent plays an exact best response on the binary tree, in both
    orders.  Returns (sup-inf value, inf-sup value); they coincide at the
    saddle point.  A stop by the holder pays the lower obstacle even if the
    writer stops at the same moment; a stop by the writer alone pays the
    upper obstacle.
    """
    n = lattice.n
    if n > MAX_ORACLE_STEPS:
        raise ValueError(f"rule enumeration capped at n={MAX_ORACLE_STEPS}, got {n}")
    model = lattice.model
    disc = math.exp(-model.r * lattice.h)

    def at(fn: LevelFn, j: int, m: int) -> float:
        return float(np.asarray(fn(j, np.array([_offset_of(m, j)])))[0])

    n_decisions = (1 << n) - 1
    level_base = [(1 << j) - 1 for j in range(n)]
    rules = np.arange(1 << n_decisions, dtype=np.uint32)

    def best_response_value(writer_fixed: bool) -> float:
        vals = [np.full(len(rules), at(lower, n, m)) for m in range(1 << n)]
        for j in range(n - 1, -1, -1):
            new_vals = []
            for m in range(1 << j):
                lo = at(lower, j, m)
                up = at(upper, j, m)
                cont = disc * 0.5 * (vals[2 * m] + vals[2 * m + 1])
                stopped = (rules & np.uint32(1 << (level_base[j] + m))) != 0
                if writer_fixed:
                    # Writer's labeling is fixed; holder best-responds.
                    # If the writer stops here the holder may stop too and
                    # claim the lower payoff, hence max(lo, up).
                    new_vals.append(np.where(stopped, max(lo, up), np.maximum(lo, cont)))
                else:
                    # Holder's labeling is fixed; writer best-responds.
                    new_vals.append(np.where(stopped, lo, np.minimum(up, cont)))
            vals = new_vals
        root = vals[0]
        return float(np.min(root)) if writer_fixed else float(np.max(root))

    value_supinf = best_response_value(writer_fixed=False)
    value_infsup = best_response_value(writer_fixed=True)
    return value_supinf, value_infsup

"""Contract/market parameters and payoff functions shared by all pricers.

All pricing works in the log-price coordinate x = ln S; conversions to the
price S = e^x happen only at I/O boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Log-price coordinate x = ln S.
LogPrice = float


@dataclass(frozen=True)
class ModelSpec:
    """Market and contract parameters for a game (Israeli) put.

    K      strike (currency, > 0)
    r      continuously compounded interest rate (per year, >= 0)
    kappa  volatility (per sqrt-year, > 0)
    T      maturity (years, > 0)
    delta  writer's cancellation penalty (currency, >= 0)

    The log-price drift mu = r - kappa**2 / 2 is always recomputed from
    r and kappa, never stored.
    """

    K: float
    r: float
    kappa: float
    T: float
    delta: float

    def __post_init__(self) -> None:
        if not self.K > 0.0:
            raise ValueError(f"strike must be positive, got {self.K}")
        if not self.kappa > 0.0:
            raise ValueError(f"volatility must be positive, got {self.kappa}")
        if not self.T > 0.0:
            raise ValueError(f"maturity must be positive, got {self.T}")
        if self.r < 0.0:
            raise ValueError(f"rate must be nonnegative, got {self.r}")
        if self.delta < 0.0:
            raise ValueError(f"penalty must be nonnegative, got {self.delta}")

    @property
    def mu(self) -> float:
        return self.r - 0.5 * self.kappa * self.kappa

    @property
    def log_strike(self) -> LogPrice:
        return float(np.log(self.K))


def make_model(K: float, r: float, kappa: float, T: float, delta: float) -> ModelSpec:
    """Validate parameters and build a ModelSpec."""
    return ModelSpec(K=float(K), r=float(r), kappa=float(kappa), T=float(T), delta=float(delta))


def psi(model: ModelSpec, x):
    """Put payoff in log-price: (K - e^x)^+.

    Accepts a scalar or an ndarray of log-prices.
    """
    return np.maximum(model.K - np.exp(x), 0.0)


def psi_plus_delta(model: ModelSpec, x):
    """Cancellation payoff in log-price: (K - e^x)^+ + delta."""
    return psi(model, x) + model.delta

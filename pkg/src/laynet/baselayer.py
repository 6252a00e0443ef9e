"""Base-ledger fee model.

The ledger is a fee function of aggregate demand; no mempool or per-transaction
state is kept. Two cost shapes are available:

* ``multiplicative``: ``f0 * max(1, D / T_max) ** gamma``
* ``piecewise_ramp``: ``alpha * d`` up to ``T_max``, then
  ``alpha * T_max + beta * (d - T_max) ** gamma``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ConfigError


class CostModel(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    PIECEWISE_RAMP = "piecewise_ramp"


@dataclass(frozen=True)
class BaseParams:
    block_size_bytes: int = 1_000_000
    mean_tx_bytes: float = 333.0
    block_interval_s: float = 600.0
    base_fee_floor: float = 1.0
    congestion_elasticity: float = 2.0
    ramp_linear_rate: float = 0.1
    ramp_penalty_coeff: float = 0.5
    cost_model: CostModel = CostModel.MULTIPLICATIVE
    fee_unit: str = "usd"

    def __post_init__(self):
        if self.block_size_bytes <= 0:
            raise ConfigError("block_size_bytes must be positive", "block_size_bytes")
        if self.mean_tx_bytes <= 0:
            raise ConfigError("mean_tx_bytes must be positive", "mean_tx_bytes")
        if self.block_interval_s <= 0:
            raise ConfigError("block_interval_s must be positive", "block_interval_s")
        if self.base_fee_floor < 0:
            raise ConfigError("base_fee_floor must be non-negative", "base_fee_floor")
        if self.congestion_elasticity < 1:
            raise ConfigError("congestion_elasticity must be >= 1", "congestion_elasticity")
        if self.ramp_linear_rate < 0:
            raise ConfigError("ramp_linear_rate must be non-negative", "ramp_linear_rate")
        if self.ramp_penalty_coeff < 0:
            raise ConfigError("ramp_penalty_coeff must be non-negative", "ramp_penalty_coeff")
        object.__setattr__(self, "cost_model", CostModel(self.cost_model))


def max_throughput(p: BaseParams) -> int:
    """Transactions per second the ledger can settle, floored to an integer."""
    # integer arithmetic keeps exact ratios (s == t_tx * dt) from flooring to ratio - 1
    num = p.block_size_bytes
    den = p.mean_tx_bytes * p.block_interval_s
    if float(den).is_integer():
        return int(num) // int(den)
    return math.floor(num / den)


def base_fee(demand_tps: float, p: BaseParams) -> float:
    if demand_tps < 0:
        raise ValueError("demand must be non-negative")
    t_max = max_throughput(p)
    if t_max < 1:
        raise ConfigError("ledger throughput floors to zero transactions per second", "block_size_bytes")
    gamma = p.congestion_elasticity
    if p.cost_model is CostModel.MULTIPLICATIVE:
        return p.base_fee_floor * max(1.0, demand_tps / t_max) ** gamma
    if demand_tps <= t_max:
        return p.ramp_linear_rate * demand_tps
    return p.ramp_linear_rate * t_max + p.ramp_penalty_coeff * (demand_tps - t_max) ** gamma


def pressure_ratio(demand_tps: float, supply_tps: float) -> float:
    if supply_tps <= 0:
        raise ConfigError("supply must be positive", "supply_tps")
    return demand_tps / supply_tps


def expected_window_fee(fees: Sequence[float]) -> float:
    if len(fees) == 0:
        raise ValueError("fee window is empty")
    return math.fsum(fees) / len(fees)


def demand_for_fee(target_fee: float, p: BaseParams) -> float:
    """Smallest demand at which the multiplicative fee reaches ``target_fee``.

    Used to show the fee has no upper bound: any target is reached at a finite demand.
    """
    if p.cost_model is not CostModel.MULTIPLICATIVE:
        raise ValueError("closed-form inverse only exists for the multiplicative model")
    if p.base_fee_floor <= 0:
        raise ValueError("a zero fee floor never grows")
    t_max = max_throughput(p)
    ratio = target_fee / p.base_fee_floor
    if ratio <= 1:
        return 0.0
    return t_max * ratio ** (1.0 / p.congestion_elasticity)

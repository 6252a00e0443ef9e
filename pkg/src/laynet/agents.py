"""Decision rules for users and hubs.

Demand response is iso-elastic, ``volume(f) = demand_scale * f ** -elasticity``,
and reserve cost couples to served volume, ``c_r(f) = c0 + c1 * volume(f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import ConfigError
from .routing import Path


class PricingMode(str, Enum):
    MONOPOLY = "monopoly"
    COMPETITIVE = "competitive"
    LIQUIDITY_INVERSE = "liquidity_inverse"


@dataclass(frozen=True)
class UserPolicy:
    discount_factor: float = 0.98
    risk_weight: float = 1.0
    forward_fee_base: float = 0.02
    forward_fee_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.discount_factor <= 1.0:
            raise ConfigError("discount_factor must lie in (0, 1]", "discount_factor")
        if self.risk_weight < 0:
            raise ConfigError("risk_weight must be non-negative", "risk_weight")


@dataclass(frozen=True)
class HubPolicy:
    pricing_mode: PricingMode = PricingMode.COMPETITIVE
    reserve_fixed: float = 0.0
    reserve_marginal: float = 0.01
    demand_scale: float = 1.0
    demand_elasticity: float = 2.0
    competitive_slack: float = 0.002
    lock_cost_rate: float = 0.0001
    rebalance_cost_rate: float = 1.0
    fee_rate: float = 0.0
    fee_sensitivity: float = 0.5
    fee_floor: float = 1e-3
    fee_cap: float = 100.0
    fee_grid_points: int = 100_001

    def __post_init__(self):
        object.__setattr__(self, "pricing_mode", PricingMode(self.pricing_mode))
        for name in ("reserve_fixed", "reserve_marginal", "competitive_slack", "lock_cost_rate",
                     "rebalance_cost_rate", "fee_rate", "fee_sensitivity"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative", name)
        if self.demand_scale <= 0:
            raise ConfigError("demand_scale must be positive", "demand_scale")
        if self.demand_elasticity <= 0:
            raise ConfigError("demand_elasticity must be positive", "demand_elasticity")
        if not 0 < self.fee_floor < self.fee_cap:
            raise ConfigError("fee grid needs 0 < fee_floor < fee_cap", "fee_cap")
        if self.fee_grid_points < 2:
            raise ConfigError("fee_grid_points must be at least 2", "fee_grid_points")

    def volume(self, fee):
        return self.demand_scale * np.power(fee, -self.demand_elasticity)

    def reserve_cost(self, fee):
        return self.reserve_fixed + self.reserve_marginal * self.volume(fee)


@dataclass
class HubLedger:
    fee_revenue: float = 0.0
    routed_count: int = 0
    lock_costs: float = 0.0
    reb_costs: float = 0.0
    epoch_revenue: float = 0.0
    epoch_routed: int = 0
    epoch_lock: float = 0.0
    epoch_reb: float = 0.0

    def begin_epoch(self) -> None:
        self.epoch_revenue = 0.0
        self.epoch_routed = 0
        self.epoch_lock = 0.0
        self.epoch_reb = 0.0

    def add_revenue(self, amount: float) -> None:
        self.fee_revenue += amount
        self.epoch_revenue += amount
        self.routed_count += 1
        self.epoch_routed += 1

    def add_lock(self, amount: float) -> None:
        self.lock_costs += amount
        self.epoch_lock += amount

    def add_reb(self, amount: float) -> None:
        self.reb_costs += amount
        self.epoch_reb += amount


class Venue(str, Enum):
    LIGHTNING = "lightning"
    ONCHAIN = "onchain"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class VenueDecision:
    venue: Venue
    path: Optional[Path] = None
    cost: Optional[float] = None


Quote = Union[float, None]


def user_choose_venue(valuation: float, ln_quote: Quote, onchain_fee: float,
                      path: Optional[Path] = None) -> VenueDecision:
    """Cheapest venue whose cost stays strictly below the valuation; Lightning wins ties."""
    if valuation <= 0:
        raise ValueError("valuation must be strictly positive")
    options = []
    if ln_quote is not None:
        options.append((ln_quote, 0, Venue.LIGHTNING))
    options.append((onchain_fee, 1, Venue.ONCHAIN))
    cost, _, venue = min(options)
    if cost >= valuation:
        return VenueDecision(Venue.ABSTAIN)
    if venue is Venue.LIGHTNING:
        return VenueDecision(venue, path, cost)
    return VenueDecision(venue, None, cost)


def monopoly_profit(policy: HubPolicy, fee):
    return (fee - policy.reserve_marginal) * policy.volume(fee) - policy.reserve_fixed


def hub_set_fee(policy: HubPolicy, liquidity: Optional[float] = None) -> float:
    mode = policy.pricing_mode
    if mode is PricingMode.COMPETITIVE:
        return policy.reserve_marginal + policy.competitive_slack
    if mode is PricingMode.LIQUIDITY_INVERSE:
        if liquidity is None:
            raise ValueError("liquidity-inverse pricing needs the direction's liquidity")
        if liquidity <= 0:
            return policy.fee_cap
        return min(policy.fee_cap, max(policy.fee_floor, policy.fee_sensitivity / liquidity))
    if not math.isfinite(policy.fee_cap):
        raise ConfigError("monopoly pricing needs a finite fee_cap", "fee_cap")
    grid = np.linspace(policy.fee_floor, policy.fee_cap, policy.fee_grid_points)
    return float(grid[int(np.argmax(monopoly_profit(policy, grid)))])


def monopoly_markup(policy: HubPolicy) -> float:
    """Closed-form monopoly fee ``c1 * eta / (eta - 1)``; defined for eta > 1."""
    eta = policy.demand_elasticity
    if eta <= 1:
        raise ValueError("no interior optimum for elasticity <= 1")
    return policy.reserve_marginal * eta / (eta - 1)


def discounted_saving(saving_per_epoch: float, horizon_epochs: int, discount: float) -> float:
    if discount == 1.0:
        return saving_per_epoch * horizon_epochs
    return saving_per_epoch * (1 - discount ** horizon_epochs) / (1 - discount)


def attach_decision(est_saving_per_epoch: float, horizon_epochs: int, onchain_open_fee: float,
                    discount: float = 1.0) -> bool:
    if horizon_epochs < 1:
        raise ValueError("horizon must be at least one epoch")
    return discounted_saving(est_saving_per_epoch, horizon_epochs, discount) > onchain_open_fee


def abandon_decision(expected_epoch_revenue: float, reserve_cost: float) -> bool:
    return expected_epoch_revenue < reserve_cost


def hub_epoch_payoff(ledger: HubLedger, liquidity_out: float, policy: HubPolicy) -> float:
    return ledger.epoch_revenue - policy.lock_cost_rate * liquidity_out - ledger.epoch_reb

"""Closed-form cost analytics: amortised channel fees, migration pressure,
crossover demand, the asymptotic routing-cost curve and cost tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselayer import BaseParams, base_fee

CURVES_HEADER = ["demand", "cost_btc", "cost_ln", "cost_combined"]


@dataclass(frozen=True)
class LnFeeModel:
    channel_open_cost: float = 10.0
    route_fee: float = 0.01
    rebalance_fee: float = 0.005
    tx_per_channel: int = 1000

    def __post_init__(self):
        for name in ("channel_open_cost", "route_fee", "rebalance_fee"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")
        if self.tx_per_channel < 1:
            raise ValueError("tx_per_channel must be at least 1")


@dataclass(frozen=True)
class AsymptoticLnModel:
    mean_path_len: float
    liquidity_per_node: float
    penalty_scale: float
    penalty_exponent: float

    def __post_init__(self):
        for name in ("mean_path_len", "liquidity_per_node", "penalty_scale", "penalty_exponent"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def amortized_ln_fee(m: LnFeeModel, tx_count: Optional[int] = None) -> float:
    n = m.tx_per_channel if tx_count is None else tx_count
    if n < 1:
        raise ValueError("tx_count must be at least 1")
    if math.isinf(n):
        return m.route_fee + m.rebalance_fee
    return m.channel_open_cost / n + m.route_fee + m.rebalance_fee


def migration_pressure(base_fee_value: float, ln_fee: float) -> float:
    if ln_fee <= 0:
        raise ZeroDivisionError("migration pressure diverges when the Lightning fee is zero")
    return base_fee_value / ln_fee


def crossover_demand(base: BaseParams, ln_fee: float, d_max: float, grid_points: int = 1000,
                     tol: float = 1e-9) -> Optional[float]:
    """Smallest demand at which the base fee strictly exceeds ``ln_fee``.

    Scans an even grid on (0, d_max] and bisects the first bracketing cell.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    grid = np.linspace(d_max / grid_points, d_max, grid_points)
    if base_fee(0.0, base) > ln_fee:
        # the base layer is dearer at every demand
        return float(grid[0])
    prev = 0.0
    for d in grid:
        d = float(d)
        if base_fee(d, base) > ln_fee:
            lo, hi = prev, d
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if base_fee(mid, base) > ln_fee:
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = d
    return None


def asymptotic_ln_cost(m: AsymptoticLnModel, demand: float) -> float:
    if demand <= 0:
        raise ValueError("demand must be positive")
    return m.mean_path_len / m.liquidity_per_node + m.penalty_scale / demand ** m.penalty_exponent


@dataclass(frozen=True)
class CostRow:
    demand: float
    cost_btc: float
    cost_ln: float
    cost_combined: float


def cost_curves(base: BaseParams, m: LnFeeModel, demand_grid: Sequence[float],
                crossover_d_max: Optional[float] = None) -> list[CostRow]:
    """Per-demand base fee, amortised channel fee and their traffic-weighted blend.

    Traffic up to the crossover demand stays on-chain and the excess moves to
    channels; the blend weights the two columns by those shares.
    """
    grid = [float(d) for d in demand_grid]
    if not grid:
        raise ValueError("demand grid is empty")
    if any(d <= 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("demand grid must be positive and strictly increasing")
    ln = amortized_ln_fee(m)
    d_star = crossover_demand(base, ln, crossover_d_max or grid[-1])
    rows = []
    for d in grid:
        btc = base_fee(d, base)
        chain_share = 1.0 if d_star is None else min(d, d_star) / d
        rows.append(CostRow(d, btc, ln, chain_share * btc + (1.0 - chain_share) * ln))
    return rows


def curves_to_csv(rows: Sequence[CostRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVES_HEADER)
    for r in rows:
        w.writerow([repr(r.demand), repr(r.cost_btc), repr(r.cost_ln), repr(r.cost_combined)])
    return buf.getvalue()

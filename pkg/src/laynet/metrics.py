"""Concentration, degree, failure-rate and hysteresis analyses over simulation output."""

from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import NotEstimable


@dataclass
class ShareTrajectory:
    shares: np.ndarray  # epochs x nodes

    def __post_init__(self):
        self.shares = np.atleast_2d(np.asarray(self.shares, dtype=float))
        if self.shares.size and np.any(self.shares < -1e-12):
            raise ValueError("liquidity shares must be non-negative")
        sums = self.shares.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("per-epoch shares must sum to one")

    def __len__(self):
        return self.shares.shape[0]


def topk_share(trajectory: ShareTrajectory, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, trajectory.shares.shape[1])
    ordered = -np.sort(-trajectory.shares, axis=1)
    return ordered[:, :k].sum(axis=1)


def gini(values) -> float:
    """Mean-absolute-difference Gini, computed from the sorted values."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0 or np.any(x < 0):
        raise ValueError("gini needs a non-empty, non-negative sample")
    total = x.sum()
    if total <= 0:
        raise ValueError("gini is undefined when every value is zero")
    n = x.size
    ranks = np.arange(1, n + 1)
    return max(0.0, float(2.0 * np.dot(ranks, x) / (n * total) - (n + 1) / n))  # clamp float dust


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    residual: float  # root-mean-square error of the log-log fit
    points: int
    tail_start: int


def degree_tail_slope(degrees: Sequence[int], min_distinct: int = 10) -> TailFit:
    """OLS slope of log CCDF against log degree from the median degree upward."""
    d = np.asarray(degrees, dtype=np.int64)
    if d.size == 0 or np.any(d < 1):
        raise NotEstimable("degrees must be positive integers")
    distinct = np.unique(d)
    if distinct.size < min_distinct:
        raise NotEstimable(f"{distinct.size} distinct degrees; need at least {min_distinct}")
    start = int(np.median(d))
    values = distinct[distinct >= start]
    ordered = np.sort(d)
    ccdf = (d.size - np.searchsorted(ordered, values, side="left")) / d.size
    if values.size < 3:
        raise NotEstimable("tail too short to fit")
    x, y = np.log(values), np.log(ccdf)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - y) ** 2)))
    return TailFit(float(slope), float(intercept), rms, int(values.size), start)


@dataclass
class FailureCurve:
    rows: list[tuple[float, float, int]]  # (demand, failure_rate, attempts)
    omitted: list[float] = field(default_factory=list)

    def rates(self) -> list[float]:
        return [r[1] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["demand", "failure_rate", "attempts"])
        for d, r, a in self.rows:
            w.writerow([repr(d), repr(r), a])
        for d in self.omitted:
            w.writerow([repr(d), "", 0])
        return buf.getvalue()


def failure_rate_curve(groups: Mapping[float, Sequence]) -> FailureCurve:
    """Failure rate per demand level from the frames observed at that level."""
    rows, omitted = [], []
    for demand in sorted(groups):
        frames = groups[demand]
        attempts = sum(f.ln_attempts for f in frames)
        failures = sum(f.ln_route_failures for f in frames)
        if attempts == 0:
            omitted.append(demand)
            continue
        rows.append((float(demand), failures / attempts, attempts))
    return FailureCurve(rows, omitted)


def failure_sweep(cfg, demands: Sequence[float], seeds: Sequence[int]) -> FailureCurve:
    """Run the config at each constant demand level for every seed and pool the frames."""
    from .engine import DemandSchedule, simulate

    groups = {}
    for d in demands:
        frames = []
        for s in seeds:
            sub = replace(cfg, seed=int(s), demand=DemandSchedule("constant", float(d)))
            frames.extend(simulate(sub).frames)
        groups[float(d)] = frames
    return failure_rate_curve(groups)


@dataclass
class HysteresisReport:
    collapsed: bool
    baseline_failure_rate: float
    stress_failure_rate: float
    initial_channel_liquidity: float
    recovered: Optional[bool] = None
    min_recovery_liquidity: Optional[float] = None

    @property
    def exceeds_initial(self) -> Optional[bool]:
        if self.min_recovery_liquidity is None:
            return None
        return self.min_recovery_liquidity > self.initial_channel_liquidity

    def to_text(self) -> str:
        items = [("collapsed", self.collapsed), ("recovered", self.recovered),
                 ("min_recovery_liquidity", self.min_recovery_liquidity),
                 ("initial_channel_liquidity", self.initial_channel_liquidity),
                 ("exceeds_initial", self.exceeds_initial),
                 ("baseline_failure_rate", self.baseline_failure_rate),
                 ("stress_failure_rate", self.stress_failure_rate)]
        return "".join(f"{k}={'' if v is None else v}\n" for k, v in items)


def _phase(state, cfg, demand: float, epochs: int):
    from .engine import step

    state.demand_override = demand
    frames = []
    for _ in range(epochs):
        state, frame = step(state, cfg)
        frames.append(frame)
    return frames


def _pooled_rate(frames) -> float:
    attempts = sum(f.ln_attempts for f in frames)
    if attempts == 0:
        return math.nan
    return sum(f.ln_route_failures for f in frames) / attempts


def _sustained(frames, threshold: float, run_length: int) -> bool:
    run = 0
    for f in frames:
        if f.ln_attempts > 0 and f.ln_route_failures / f.ln_attempts > threshold:
            run += 1
            if run >= run_length:
                return True
        else:
            run = 0
    return False


def hysteresis_probe(cfg, stress_demand: float, relief_demand: float, baseline_epochs: int = 10,
                     stress_epochs: int = 20, relief_epochs: int = 60,
                     collapse_threshold: float = 0.9, recovery_threshold: float = 0.1,
                     sustain: int = 10, max_multiple: float = 10.0,
                     iterations: int = 12) -> HysteresisReport:
    """Baseline, stress and relief phases, then bisect the per-channel injection that restores routing.

    Recovery at injection ``x`` means the pooled failure rate over the second
    half of the relief phase falls below ``recovery_threshold`` after adding
    ``x`` to every open channel at the start of relief.
    """
    from .engine import init_state, inject_liquidity

    if stress_demand <= relief_demand:
        raise ValueError("stress demand must exceed relief demand")
    state = init_state(cfg)
    baseline = _phase(state, cfg, relief_demand, baseline_epochs)
    stress = _phase(state, cfg, stress_demand, stress_epochs)
    initial = cfg.channel_capacity
    report = HysteresisReport(
        collapsed=_sustained(stress, collapse_threshold, sustain),
        baseline_failure_rate=_pooled_rate(baseline),
        stress_failure_rate=_pooled_rate(stress),
        initial_channel_liquidity=initial,
    )
    if not report.collapsed:
        return report

    def recovers(x: float) -> bool:
        s = copy.deepcopy(state)
        if x > 0:
            inject_liquidity(s, x)
        frames = _phase(s, cfg, relief_demand, relief_epochs)
        rate = _pooled_rate(frames[relief_epochs // 2:])
        return not math.isnan(rate) and rate < recovery_threshold

    lo, hi = 0.0, max_multiple * initial
    if recovers(lo):
        report.recovered, report.min_recovery_liquidity = True, 0.0
        return report
    if not recovers(hi):
        report.recovered = False
        return report
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if recovers(mid):
            hi = mid
        else:
            lo = mid
    report.recovered, report.min_recovery_liquidity = True, hi
    return report


def rent_capture(cfg, topologies: Sequence[str] = ("star", "random"),
                 seeds: Sequence[int] = (0, 1, 2)) -> dict[str, float]:
    """Mean per-hub, per-epoch payoff under each initial topology (a reported comparison)."""
    from .engine import Topology, simulate

    out = {}
    for kind in topologies:
        vals = []
        for s in seeds:
            sub = replace(cfg, seed=int(s), topology=Topology(kind, cfg.topology.p))
            res = simulate(sub)
            vals.extend(v for epoch in res.payoffs for v in epoch.values())
        out[kind] = float(np.mean(vals)) if vals else math.nan
    return out

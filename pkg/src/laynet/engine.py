"""Deterministic epoch loop tying the base layer, overlay and agents together.

Nodes ``0 .. H-1`` are hubs and ``H .. H+U-1`` are users. Every epoch runs in a
fixed order: hubs re-price, transactions are drawn and routed, sampled users
consider opening a channel to a hub, hubs drop unprofitable channels, the
graph is rebalanced if it drifted too far, and one MetricsFrame is emitted.
All randomness comes from a single Philox stream seeded from the config.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .agents import (HubLedger, HubPolicy, PricingMode, UserPolicy, Venue, abandon_decision,
                     attach_decision, hub_epoch_payoff, hub_set_fee, user_choose_venue)
from .baselayer import BaseParams, base_fee, max_throughput
from .equilibrium import LnFeeModel
from .errors import AtomicityFailure, ConfigError
from .overlay import OverlayGraph, Transaction, close_channel, enforcement_feasible, execute_payment, open_channel
from .rebalance import RebalanceProblem, apply_plan, balanced_target, cycle_hops, deviation, greedy_rebalance
from .routing import SuccessModel, best_path, path_cost, shortest_path_tree, success_probability

RNG_ALGORITHM = "philox"
TOPK_FRACTION = 0.1


@dataclass(frozen=True)
class DemandSchedule:
    kind: str = "geometric"
    d0: float = 2.0
    growth: float = 1.01
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "geometric", "linear"):
            raise ConfigError(f"unknown demand schedule {self.kind!r}", "demand.kind")
        if self.d0 < 0:
            raise ConfigError("d0 must be non-negative", "demand.d0")
        if self.kind == "geometric" and self.growth <= 0:
            raise ConfigError("growth must be positive", "demand.growth")

    def at(self, epoch: int) -> float:
        if self.kind == "constant":
            return self.d0
        if self.kind == "geometric":
            return self.d0 * self.growth ** epoch
        return max(0.0, self.d0 + self.slope * epoch)


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise ConfigError("log-uniform bounds need 0 < low <= high", "low")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        return np.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))

    @property
    def geometric_mean(self) -> float:
        return math.sqrt(self.low * self.high)


@dataclass(frozen=True)
class Topology:
    kind: str = "random"
    p: float = 0.1

    def __post_init__(self):
        if self.kind not in ("star", "ring", "random", "hubs"):
            raise ConfigError(f"unknown topology {self.kind!r}", "topology.kind")
        if not 0 <= self.p <= 1:
            raise ConfigError("edge probability must lie in [0, 1]", "topology.p")


@dataclass(frozen=True)
class AttachConfig:
    enabled: bool = True
    fraction: float = 0.1
    horizon: int = 50
    window: int = 10
    user_funding: float = 50.0
    hub_match: float = 1.0
    max_destinations: int = 8

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ConfigError("attach fraction must lie in [0, 1]", "attach.fraction")
        if self.horizon < 1:
            raise ConfigError("attach horizon must be at least 1", "attach.horizon")
        if self.window < 1:
            raise ConfigError("attach window must be at least 1", "attach.window")
        if self.user_funding <= 0 or self.hub_match < 0:
            raise ConfigError("channel funding must be positive", "attach.user_funding")


@dataclass(frozen=True)
class RebalanceConfig:
    enabled: bool = True
    trigger: float = 0.1
    quantum: float = 5.0
    max_cycles: int = 20

    def __post_init__(self):
        if self.trigger < 0:
            raise ConfigError("rebalance trigger must be non-negative", "rebalance.trigger")
        if self.quantum <= 0:
            raise ConfigError("rebalance quantum must be positive", "rebalance.quantum")
        if self.max_cycles < 0:
            raise ConfigError("max_cycles must be non-negative", "rebalance.max_cycles")


@dataclass
class SimConfig:
    seed: int
    epochs: int = 200
    user_count: int = 50
    initial_hub_count: int = 5
    base: BaseParams = field(default_factory=BaseParams)
    demand: DemandSchedule = field(default_factory=DemandSchedule)
    valuation: LogUniform = field(default_factory=lambda: LogUniform(0.5, 50.0))
    amount: LogUniform = field(default_factory=lambda: LogUniform(0.1, 10.0))
    margin: float = 0.0
    user_policy: UserPolicy = field(default_factory=UserPolicy)
    hub_policy: HubPolicy = field(default_factory=HubPolicy)
    hub_overrides: dict[int, HubPolicy] = field(default_factory=dict)
    topology: Topology = field(default_factory=Topology)
    channel_capacity: float = 100.0
    epoch_seconds: float = 1.0
    attach: AttachConfig = field(default_factory=AttachConfig)
    rebalance: RebalanceConfig = field(default_factory=RebalanceConfig)
    success_model: SuccessModel = field(default_factory=SuccessModel)
    hazard_enabled: bool = False
    route_knowledge: str = "local"
    route_attempts: int = 3
    flow_pattern: str = "uniform"
    rng: str = RNG_ALGORITHM
    ln_fee: LnFeeModel = field(default_factory=LnFeeModel)

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1", "epochs")
        if self.user_count < 0:
            raise ConfigError("user_count must be non-negative", "user_count")
        if self.initial_hub_count < 1:
            raise ConfigError("initial_hub_count must be at least 1", "initial_hub_count")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative", "margin")
        if self.channel_capacity <= 0:
            raise ConfigError("channel_capacity must be positive", "channel_capacity")
        if self.epoch_seconds <= 0:
            raise ConfigError("epoch_seconds must be positive", "epoch_seconds")
        if self.route_knowledge not in ("none", "local", "global"):
            raise ConfigError(f"unknown route_knowledge {self.route_knowledge!r}", "route_knowledge")
        if self.route_attempts < 1:
            raise ConfigError("route_attempts must be at least 1", "route_attempts")
        if self.flow_pattern not in ("uniform", "directional"):
            raise ConfigError(f"unknown flow_pattern {self.flow_pattern!r}", "flow_pattern")
        if self.rng != RNG_ALGORITHM:
            raise ConfigError(f"only the {RNG_ALGORITHM} generator is supported", "rng")
        for h in self.hub_overrides:
            if not 0 <= h < self.initial_hub_count:
                raise ConfigError(f"override for unknown hub {h}", f"hub.{h}")
        if max_throughput(self.base) < 1:
            raise ConfigError("base layer parameters give zero throughput", "base")

    @property
    def node_count(self) -> int:
        return self.initial_hub_count + self.user_count

    def hub_policy_for(self, hub: int) -> HubPolicy:
        return self.hub_overrides.get(hub, self.hub_policy)


@dataclass
class MetricsFrame:
    epoch: int
    demand: float
    onchain_fee: float
    ln_mean_fee: float
    ln_route_failures: int
    ln_attempts: int
    abstentions: int
    onchain_count: int
    ln_count: int
    top1_liquidity_share: float
    topk_liquidity_share: float
    gini_liquidity: float
    channel_count: int
    opens: int
    closes: int


TRACE_FIELDS = [f.name for f in fields(MetricsFrame)]


@dataclass
class EpochAudit:
    epoch: int
    sampled: int
    capacity_before: float
    opened: float
    closed: float
    injected: float
    capacity_after: float


@dataclass
class EpochState:
    epoch: int
    graph: OverlayGraph
    ledgers: dict[int, HubLedger]
    rng: np.random.Generator
    hubs: list[int]
    users: list[int]
    chain_fees: deque = field(default_factory=deque)
    recent_dests: deque = field(default_factory=deque)
    channel_stats: dict[int, deque] = field(default_factory=dict)
    demand_override: Optional[float] = None
    pending_injection: float = 0.0
    frame: Optional[MetricsFrame] = None
    audit: list[EpochAudit] = field(default_factory=list)
    payoffs: list[dict[int, float]] = field(default_factory=list)


@dataclass
class RunResult:
    frames: list[MetricsFrame]
    shares: list[list[float]]
    initial_shares: list[float]
    audit: list[EpochAudit]
    payoffs: list[dict[int, float]]
    graph: OverlayGraph


@functools.lru_cache(maxsize=64)
def _flat_fee(policy: HubPolicy) -> float:
    return hub_set_fee(policy)


def _hub_alpha(policy: HubPolicy, liquidity: float) -> float:
    if policy.pricing_mode is PricingMode.LIQUIDITY_INVERSE:
        return hub_set_fee(policy, liquidity)
    return _flat_fee(policy)


def _set_user_fees(g: OverlayGraph, cid: int, user: int, pol: UserPolicy) -> None:
    ch = g.channels[cid]
    ch.set_fees(ch.endpoint_a == user, pol.forward_fee_base, pol.forward_fee_rate)


def _connect(g: OverlayGraph, cfg: SimConfig, a: int, b: int, hub_set: set) -> None:
    half = cfg.channel_capacity / 2
    cid = open_channel(g, a, b, half, half)
    for n in (a, b):
        if n not in hub_set:
            _set_user_fees(g, cid, n, cfg.user_policy)


def _build_topology(cfg: SimConfig, rng: np.random.Generator) -> OverlayGraph:
    g = OverlayGraph(node_count=cfg.node_count)
    H, N = cfg.initial_hub_count, cfg.node_count
    hubs = set(range(H))
    kind = cfg.topology.kind
    if kind == "star":
        for n in range(1, N):
            _connect(g, cfg, 0, n, hubs)
    elif kind == "ring":
        if N == 2:
            _connect(g, cfg, 0, 1, hubs)
        elif N > 2:
            for n in range(N):
                _connect(g, cfg, n, (n + 1) % N, hubs)
    elif kind == "random":
        draws = rng.random(N * (N - 1) // 2)
        k = 0
        for a in range(N):
            for b in range(a + 1, N):
                if (a < H and b < H) or draws[k] < cfg.topology.p:
                    _connect(g, cfg, a, b, hubs)
                k += 1
    else:
        for a in range(H):
            for b in range(a + 1, H):
                _connect(g, cfg, a, b, hubs)
        U = cfg.user_count
        for i in range(U):
            _connect(g, cfg, (i * H) // U, H + i, hubs)
    g.onchain_op_count = 0
    return g


def init_state(cfg: SimConfig) -> EpochState:
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    g = _build_topology(cfg, rng)
    hubs = list(range(cfg.initial_hub_count))
    users = list(range(cfg.initial_hub_count, cfg.node_count))
    return EpochState(0, g, {h: HubLedger() for h in hubs}, rng, hubs, users)


def _reprice(state: EpochState, cfg: SimConfig) -> None:
    g = state.graph
    for h in state.hubs:
        pol = cfg.hub_policy_for(h)
        for cid in g.neighbors(h).values():
            ch = g.channels[cid]
            fwd = ch.endpoint_a == h
            ch.set_fees(fwd, _hub_alpha(pol, ch.liquidity(fwd)), pol.fee_rate)


def _tx_count(expected: float, rng: np.random.Generator) -> int:
    whole = math.floor(expected)
    return whole + int(rng.random() < expected - whole)


def _sample_transactions(state: EpochState, cfg: SimConfig, demand: float) -> list[Transaction]:
    rng = state.rng
    n = _tx_count(demand * cfg.epoch_seconds, rng)
    users = state.users
    if n == 0 or not users:
        return []
    if cfg.flow_pattern == "uniform":
        N = state.graph.node_count
        if N < 2:
            return []
        src = np.asarray(users)[rng.integers(len(users), size=n)]
        dst = rng.integers(N - 1, size=n)
        dst = dst + (dst >= src)
    else:
        half = len(users) // 2
        if half == 0:
            return []
        src = np.asarray(users[:half])[rng.integers(half, size=n)]
        dst = np.asarray(users[half:])[rng.integers(len(users) - half, size=n)]
    amounts = cfg.amount.sample(rng, n)
    values = cfg.valuation.sample(rng, n)
    return [Transaction(int(s), int(d), float(a), float(v), state.epoch)
            for s, d, a, v in zip(src, dst, amounts, values)]


def _make_view(g: OverlayGraph, cfg: SimConfig, sender: int, excluded: set):
    chans = g.channels
    mode = cfg.route_knowledge

    def view(cid: int, fwd: bool) -> float:
        if (cid, fwd) in excluded:
            return 0.0
        ch = chans[cid]
        if mode == "global" or (mode == "local" and sender in (ch.endpoint_a, ch.endpoint_b)):
            return ch.liquidity(fwd)
        return ch.capacity

    return view


def _ln_quote(g: OverlayGraph, cfg: SimConfig, path, amount: float, chain_fee: float) -> float:
    cost = path_cost(g, path, amount)
    if cfg.hazard_enabled:
        risk = 1.0 - success_probability(g, path, cfg.success_model)
        cost += cfg.user_policy.risk_weight * risk * chain_fee
    return cost


def _credit(state: EpochState, path, receipt) -> None:
    g = state.graph
    for i in range(1, len(path.hops)):
        cid, fwd = path.hops[i]
        sender = g.channels[cid].sender(fwd)
        if sender in state.ledgers:
            state.ledgers[sender].add_revenue(receipt.per_hop_fees[i])
            stat = state.channel_stats.setdefault(cid, deque())
            if stat and stat[-1][0] == state.epoch:
                e, rev, vol = stat[-1]
                stat[-1] = (e, rev + receipt.per_hop_fees[i], vol + 1)
            else:
                stat.append((state.epoch, receipt.per_hop_fees[i], 1))


def _route_payment(state: EpochState, cfg: SimConfig, tx: Transaction, path, excluded: set):
    """Try up to ``route_attempts`` paths; return the receipt or None on failure."""
    g = state.graph
    for attempt in range(cfg.route_attempts):
        if cfg.hazard_enabled:
            if state.rng.random() >= success_probability(g, path, cfg.success_model):
                return None
        try:
            receipt = execute_payment(g, path, tx.amount, cfg.margin)
        except AtomicityFailure as exc:
            excluded.add(path.hops[exc.hop_index])
            if attempt + 1 == cfg.route_attempts:
                return None
            path = best_path(g, tx.source, tx.dest, tx.amount, cfg.margin,
                             view=_make_view(g, cfg, tx.source, excluded))
            if path is None:
                return None
            continue
        _credit(state, path, receipt)
        return receipt
    return None


def _attach(state: EpochState, cfg: SimConfig, demand: float, chain_fee: float) -> tuple[int, float]:
    ac = cfg.attach
    users = state.users
    if not ac.enabled or not users or not state.hubs:
        return 0, 0.0
    m = math.ceil(ac.fraction * len(users))
    if m == 0:
        return 0, 0.0
    chosen = state.rng.choice(len(users), size=m, replace=False)
    dests = []
    for _, d in reversed(state.recent_dests):
        if d not in dests:
            dests.append(d)
            if len(dests) == ac.max_destinations:
                break
    if not dests:
        return 0, 0.0
    g = state.graph
    chain_avg = math.fsum(state.chain_fees) / len(state.chain_fees)
    ref = cfg.amount.geometric_mean
    trees = {h: shortest_path_tree(g, h, ref, cfg.margin) for h in state.hubs}
    up = cfg.user_policy
    own = up.forward_fee_base + up.forward_fee_rate * ref
    rate = demand * cfg.epoch_seconds / len(users)
    opens, opened = 0, 0.0
    for idx in chosen:
        u = users[int(idx)]
        best = None
        for h in state.hubs:
            if g.channel_between(u, h) is not None:
                continue
            costs = []
            for d in dests:
                if d == u:
                    continue
                if d == h:
                    costs.append(own)
                    continue
                p = trees[h].get(d)
                if p is None or u in p.nodes:
                    costs.append(chain_avg)
                else:
                    costs.append(own + _ln_quote(g, cfg, p, ref, chain_fee))
            if not costs:
                continue
            saving = max(0.0, chain_avg - math.fsum(costs) / len(costs)) * rate
            if best is None or saving > best[0]:
                best = (saving, h)
        if best is None:
            continue
        saving, h = best
        if attach_decision(saving, ac.horizon, chain_fee, up.discount_factor):
            cid = open_channel(g, u, h, ac.user_funding, ac.hub_match * ac.user_funding,
                               onchain_fee=chain_fee, epoch=state.epoch)
            _set_user_fees(g, cid, u, up)
            ch = g.channels[cid]
            fwd = ch.endpoint_a == h
            pol = cfg.hub_policy_for(h)
            ch.set_fees(fwd, _hub_alpha(pol, ch.liquidity(fwd)), pol.fee_rate)
            opens += 1
            opened += ch.capacity
    return opens, opened


def _abandon(state: EpochState, cfg: SimConfig, chain_fee: float) -> tuple[int, float]:
    g = state.graph
    window = cfg.attach.window
    closes, closed = 0, 0.0
    for h in state.hubs:
        pol = cfg.hub_policy_for(h)
        for cid in list(g.neighbors(h).values()):
            ch = g.channels[cid]
            if state.epoch - ch.opened_epoch < window:
                continue
            stat = state.channel_stats.get(cid, ())
            recent = [s for s in stat if s[0] > state.epoch - window]
            revenue = math.fsum(s[1] for s in recent) / window
            volume = sum(s[2] for s in recent) / window
            if not abandon_decision(revenue, pol.reserve_fixed + pol.reserve_marginal * volume):
                continue
            balance = ch.liquidity(ch.endpoint_a == h)
            if balance > 0 and enforcement_feasible(balance, chain_fee):
                closed += ch.capacity
                close_channel(g, cid, chain_fee)
                state.channel_stats.pop(cid, None)
                closes += 1
    return closes, closed


def _rebalance(state: EpochState, cfg: SimConfig) -> None:
    rc = cfg.rebalance
    g = state.graph
    if not rc.enabled or not g.channels or rc.max_cycles == 0:
        return
    target = balanced_target(g)
    if deviation(g, target) <= rc.trigger * g.total_capacity():
        return
    plan = greedy_rebalance(RebalanceProblem(g, target, rc.quantum), rc.max_cycles)
    for cycle, amount in plan.steps:
        for cid, fwd in cycle_hops(g, cycle):
            ch = g.channels[cid]
            sender = ch.sender(fwd)
            if sender in state.ledgers:
                pol = cfg.hub_policy_for(sender)
                state.ledgers[sender].add_reb(pol.rebalance_cost_rate * ch.hop_fee(fwd, amount))
    apply_plan(g, plan)


def inject_liquidity(state: EpochState, per_channel: float) -> float:
    """Add ``per_channel`` to every open channel, split evenly across directions."""
    if per_channel < 0:
        raise ValueError("injection must be non-negative")
    added = 0.0
    for ch in state.graph.channels.values():
        ch.liq_ab += per_channel / 2
        ch.liq_ba += per_channel / 2
        ch.capacity += per_channel
        added += per_channel
    state.pending_injection += added
    return added


def _shares(g: OverlayGraph) -> list[float]:
    out = [0.0] * g.node_count
    for ch in g.channels.values():
        out[ch.endpoint_a] += ch.liq_ab
        out[ch.endpoint_b] += ch.liq_ba
    total = math.fsum(out)
    if total <= 0:
        return [0.0] * g.node_count
    return [v / total for v in out]


def topk_count(node_count: int) -> int:
    return max(1, math.ceil(TOPK_FRACTION * node_count))


def step(state: EpochState, cfg: SimConfig) -> tuple[EpochState, MetricsFrame]:
    """Advance one epoch in place and return the state with its metrics frame."""
    from .metrics import gini

    g = state.graph
    cap_before = g.total_capacity()
    injected, state.pending_injection = state.pending_injection, 0.0
    cap_before -= injected
    for ledger in state.ledgers.values():
        ledger.begin_epoch()

    _reprice(state, cfg)
    demand = cfg.demand.at(state.epoch) if state.demand_override is None else state.demand_override
    chain_fee = base_fee(demand, cfg.base)
    state.chain_fees.append(chain_fee)
    while len(state.chain_fees) > cfg.attach.window:
        state.chain_fees.popleft()

    txs = _sample_transactions(state, cfg, demand)
    attempts = failures = ln_count = abstain = 0
    fees = []
    onchain = []
    for i, tx in enumerate(txs):
        excluded: set = set()
        path = best_path(g, tx.source, tx.dest, tx.amount, cfg.margin,
                         view=_make_view(g, cfg, tx.source, excluded))
        quote = None if path is None else _ln_quote(g, cfg, path, tx.amount, chain_fee)
        decision = user_choose_venue(tx.valuation, quote, chain_fee, path)
        if decision.venue is Venue.LIGHTNING:
            attempts += 1
            receipt = _route_payment(state, cfg, tx, path, excluded)
            if receipt is None:
                failures += 1
            else:
                ln_count += 1
                fees.append(receipt.total_fee)
        elif decision.venue is Venue.ONCHAIN:
            onchain.append((-tx.valuation, i))
        else:
            abstain += 1
        state.recent_dests.append((state.epoch, tx.dest))
    while state.recent_dests and state.recent_dests[0][0] <= state.epoch - cfg.attach.window:
        state.recent_dests.popleft()
    # block space is finite: only the highest-valued on-chain payments clear
    block_cap = int(max_throughput(cfg.base) * cfg.epoch_seconds)
    onchain.sort()
    onchain_count = min(len(onchain), block_cap)
    abstain += len(onchain) - onchain_count
    g.onchain_op_count += onchain_count
    g.onchain_fee_paid += onchain_count * chain_fee

    opens, opened = _attach(state, cfg, demand, chain_fee)
    closes, closed = _abandon(state, cfg, chain_fee)
    _rebalance(state, cfg)

    payoff = {}
    for h in state.hubs:
        pol = cfg.hub_policy_for(h)
        out = g.outbound(h)
        state.ledgers[h].add_lock(pol.lock_cost_rate * out)
        payoff[h] = hub_epoch_payoff(state.ledgers[h], out, pol)
    state.payoffs.append(payoff)

    shares = _shares(g)
    ordered = sorted(shares, reverse=True)
    frame = MetricsFrame(
        epoch=state.epoch,
        demand=demand,
        onchain_fee=chain_fee,
        ln_mean_fee=math.fsum(fees) / len(fees) if fees else math.nan,
        ln_route_failures=failures,
        ln_attempts=attempts,
        abstentions=abstain,
        onchain_count=onchain_count,
        ln_count=ln_count,
        top1_liquidity_share=ordered[0] if ordered else 0.0,
        topk_liquidity_share=math.fsum(ordered[:topk_count(len(ordered))]) if ordered else 0.0,
        gini_liquidity=gini(shares) if any(v > 0 for v in shares) else math.nan,
        channel_count=len(g.channels),
        opens=opens,
        closes=closes,
    )
    state.audit.append(EpochAudit(state.epoch, len(txs), cap_before, opened, closed, injected,
                                  g.total_capacity()))
    state.frame = frame
    state.epoch += 1
    return state, frame


def simulate(cfg: SimConfig) -> RunResult:
    state = init_state(cfg)
    initial = _shares(state.graph)
    frames, shares = [], []
    for _ in range(cfg.epochs):
        state, frame = step(state, cfg)
        frames.append(frame)
        shares.append(_shares(state.graph))
    return RunResult(frames, shares, initial, state.audit, state.payoffs, state.graph)


def run(cfg: SimConfig) -> list[MetricsFrame]:
    return simulate(cfg).frames


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_to_csv(frames) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for f in frames:
        w.writerow([_fmt(getattr(f, name)) for name in TRACE_FIELDS])
    return buf.getvalue()


def shares_to_csv(shares: list[list[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "node", "share"])
    for epoch, row in enumerate(shares):
        for node, s in enumerate(row):
            w.writerow([epoch, node, repr(s)])
    return buf.getvalue()


def check_invariants(result: RunResult, rel_tol: float = 1e-9) -> list[str]:
    """Accounting and conservation violations found in a run (empty when clean)."""
    problems = []
    for f, a in zip(result.frames, result.audit):
        if f.ln_attempts != f.ln_count + f.ln_route_failures:
            problems.append(f"epoch {f.epoch}: attempts != successes + failures")
        if a.sampled != f.ln_attempts + f.onchain_count + f.abstentions:
            problems.append(f"epoch {f.epoch}: decisions do not partition sampled transactions")
        expect = a.capacity_before + a.injected + a.opened - a.closed
        if abs(expect - a.capacity_after) > rel_tol * max(1.0, expect):
            problems.append(f"epoch {f.epoch}: capacity {a.capacity_after} != {expect}")
        for name in ("top1_liquidity_share", "topk_liquidity_share"):
            v = getattr(f, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                problems.append(f"epoch {f.epoch}: {name} out of range")
    for row in result.shares:
        if row and any(row) and abs(math.fsum(row) - 1.0) > 1e-9:
            problems.append("shares do not sum to one")
            break
    for ch in result.graph.channels.values():
        if ch.liq_ab < 0 or ch.liq_ba < 0:
            problems.append("negative directional liquidity")
            break
    return problems

"""Channel graph, multi-hop payment execution and on-chain lifecycle.

A channel direction is addressed by ``(channel_id, forward)`` where ``forward``
is True for ``a -> b``. Fee parameters on a direction belong to the node that
sends over it.

Payment amounts are accumulated destination-backward: the last hop carries the
payment amount, and every earlier hop carries the amount of the hop after it
plus that hop's fee. The first hop's fee is the sender's own policy and moves
no funds; it is still reported in ``per_hop_fees`` so that receipts line up
with the selection cost used by routing.
"""

from __future__ import annotations

import copy
import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

from .errors import AtomicityFailure, ChannelError, RoutingError

Hop = tuple[int, bool]

GRAPH_CSV_HEADER = ["a", "b", "liq_ab", "liq_ba", "alpha_ab", "beta_ab", "alpha_ba", "beta_ba"]


@dataclass
class ChannelState:
    endpoint_a: int
    endpoint_b: int
    liq_ab: float
    liq_ba: float
    fee_base_ab: float = 0.0
    fee_base_ba: float = 0.0
    fee_rate_ab: float = 0.0
    fee_rate_ba: float = 0.0
    opened_epoch: int = 0
    capacity: float = 0.0

    def __post_init__(self):
        if self.endpoint_a == self.endpoint_b:
            raise ChannelError("a channel needs two distinct endpoints")
        if self.liq_ab < 0 or self.liq_ba < 0:
            raise ChannelError("directional liquidity must be non-negative")
        if not self.capacity:
            self.capacity = self.liq_ab + self.liq_ba

    def sender(self, forward: bool) -> int:
        return self.endpoint_a if forward else self.endpoint_b

    def receiver(self, forward: bool) -> int:
        return self.endpoint_b if forward else self.endpoint_a

    def liquidity(self, forward: bool) -> float:
        return self.liq_ab if forward else self.liq_ba

    def fee_base(self, forward: bool) -> float:
        return self.fee_base_ab if forward else self.fee_base_ba

    def fee_rate(self, forward: bool) -> float:
        return self.fee_rate_ab if forward else self.fee_rate_ba

    def hop_fee(self, forward: bool, amount: float) -> float:
        return self.fee_base(forward) + self.fee_rate(forward) * amount

    def set_fees(self, forward: bool, base: float, rate: float) -> None:
        if forward:
            self.fee_base_ab, self.fee_rate_ab = base, rate
        else:
            self.fee_base_ba, self.fee_rate_ba = base, rate

    def shift(self, forward: bool, amount: float) -> None:
        """Move ``amount`` from the sending side to the receiving side."""
        if forward:
            self.liq_ab -= amount
            self.liq_ba += amount
        else:
            self.liq_ba -= amount
            self.liq_ab += amount


@dataclass(frozen=True)
class Transaction:
    source: int
    dest: int
    amount: float
    valuation: float
    issued_epoch: int = 0

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("payment amount must be positive")
        if self.valuation <= 0:
            raise ValueError("transaction valuation must be strictly positive")


@dataclass(frozen=True)
class PaymentReceipt:
    total_fee: float
    per_hop_fees: tuple[float, ...]
    forward_amounts: tuple[float, ...]
    paid_fee: float  # what the sender actually paid on top of the amount


@dataclass
class OverlayGraph:
    node_count: int = 0
    channels: dict[int, ChannelState] = field(default_factory=dict)
    onchain_op_count: int = 0
    onchain_fee_paid: float = 0.0
    fee_revenue: dict[int, float] = field(default_factory=dict)
    next_channel_id: int = 0
    _pairs: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)
    _adj: dict[int, dict[int, int]] = field(default_factory=dict, repr=False)

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def add_node(self) -> int:
        self.node_count += 1
        return self.node_count - 1

    def has_node(self, n: int) -> bool:
        return 0 <= n < self.node_count

    def channel_between(self, a: int, b: int) -> int | None:
        return self._pairs.get((min(a, b), max(a, b)))

    def neighbors(self, n: int) -> dict[int, int]:
        """Map neighbour -> channel id."""
        return self._adj.get(n, {})

    def degree(self, n: int) -> int:
        return len(self._adj.get(n, ()))

    def outbound(self, n: int) -> float:
        total = 0.0
        for cid in self._adj.get(n, {}).values():
            ch = self.channels[cid]
            total += ch.liq_ab if ch.endpoint_a == n else ch.liq_ba
        return total

    def total_capacity(self) -> float:
        return sum(ch.capacity for ch in self.channels.values())

    def hop_from(self, cid: int, sender: int) -> Hop:
        ch = self.channels[cid]
        if sender == ch.endpoint_a:
            return (cid, True)
        if sender == ch.endpoint_b:
            return (cid, False)
        raise ChannelError(f"node {sender} is not an endpoint of channel {cid}")

    def copy(self) -> "OverlayGraph":
        return copy.deepcopy(self)

    def _register(self, cid: int, ch: ChannelState) -> None:
        self.channels[cid] = ch
        a, b = ch.endpoint_a, ch.endpoint_b
        self._pairs[(min(a, b), max(a, b))] = cid
        self._adj.setdefault(a, {})[b] = cid
        self._adj.setdefault(b, {})[a] = cid


def open_channel(g: OverlayGraph, a: int, b: int, fund_a: float, fund_b: float,
                 onchain_fee: float = 0.0, epoch: int = 0) -> int:
    if a == b:
        raise ChannelError("cannot open a channel to self")
    if not (g.has_node(a) and g.has_node(b)):
        raise ChannelError(f"unknown node in channel ({a}, {b})")
    if g.channel_between(a, b) is not None:
        raise ChannelError(f"channel ({a}, {b}) already exists")
    if fund_a < 0 or fund_b < 0:
        raise ChannelError("funding must be non-negative")
    if fund_a + fund_b <= 0:
        raise ChannelError("channel needs positive total funding")
    cid = g.next_channel_id
    g.next_channel_id += 1
    g._register(cid, ChannelState(a, b, float(fund_a), float(fund_b),
                                  opened_epoch=epoch, capacity=float(fund_a) + float(fund_b)))
    g.onchain_op_count += 1
    g.onchain_fee_paid += onchain_fee
    return cid


def close_channel(g: OverlayGraph, cid: int, onchain_fee: float = 0.0) -> tuple[float, float]:
    ch = g.channels.pop(cid, None)
    if ch is None:
        raise ChannelError(f"unknown channel {cid}")
    a, b = ch.endpoint_a, ch.endpoint_b
    del g._pairs[(min(a, b), max(a, b))]
    del g._adj[a][b]
    del g._adj[b][a]
    g.onchain_op_count += 1
    g.onchain_fee_paid += onchain_fee
    return ch.liq_ab, ch.liq_ba


def enforcement_feasible(in_flight_value: float, chain_fee: float) -> bool:
    """Whether on-chain recourse is worth its fee (boundary counts as feasible)."""
    if in_flight_value <= 0:
        raise ValueError("in-flight value must be positive")
    return in_flight_value >= chain_fee


def forward_amounts(g: OverlayGraph, hops: Iterable[Hop], amount: float) -> tuple[list[float], list[float]]:
    """Per-hop carried amounts and per-hop fees, accumulated destination-backward."""
    hops = list(hops)
    carried = [0.0] * len(hops)
    fees = [0.0] * len(hops)
    x = amount
    for i in range(len(hops) - 1, -1, -1):
        cid, fwd = hops[i]
        carried[i] = x
        fees[i] = g.channels[cid].hop_fee(fwd, x)
        x = x + fees[i]
    return carried, fees


def execute_payment(g: OverlayGraph, path, amount: float, margin: float = 0.0) -> PaymentReceipt:
    """Atomically move ``amount`` along ``path``; raise AtomicityFailure on any short hop."""
    if amount <= 0:
        raise ValueError("payment amount must be positive")
    hops = list(path.hops)
    if not hops:
        if path.source != path.dest:
            raise RoutingError("empty path between distinct nodes")
        return PaymentReceipt(0.0, (), (), 0.0)
    for cid, _ in hops:
        if cid not in g.channels:
            raise AtomicityFailure(f"channel {cid} no longer exists")
    carried, fees = forward_amounts(g, hops, amount)
    for i, (cid, fwd) in enumerate(hops):
        if g.channels[cid].liquidity(fwd) < carried[i] + margin:
            raise AtomicityFailure(f"hop {i} on channel {cid} lacks liquidity", hop_index=i)
    for i, (cid, fwd) in enumerate(hops):
        ch = g.channels[cid]
        ch.shift(fwd, carried[i])
        if i > 0:
            node = ch.sender(fwd)
            g.fee_revenue[node] = g.fee_revenue.get(node, 0.0) + fees[i]
    return PaymentReceipt(
        total_fee=sum(fees),
        per_hop_fees=tuple(fees),
        forward_amounts=tuple(carried),
        paid_fee=carried[0] - amount,
    )


def liquidity_share(g: OverlayGraph, h: int) -> float:
    total = sum(ch.liq_ab + ch.liq_ba for ch in g.channels.values())
    if total <= 0:
        raise ValueError("no outbound liquidity in the graph")
    return g.outbound(h) / total


def liquidity_shares(g: OverlayGraph) -> list[float]:
    total = sum(ch.liq_ab + ch.liq_ba for ch in g.channels.values())
    if total <= 0:
        raise ValueError("no outbound liquidity in the graph")
    out = [0.0] * g.node_count
    for ch in g.channels.values():
        out[ch.endpoint_a] += ch.liq_ab
        out[ch.endpoint_b] += ch.liq_ba
    return [v / total for v in out]


def graph_to_csv(g: OverlayGraph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRAPH_CSV_HEADER)
    for cid in sorted(g.channels):
        ch = g.channels[cid]
        w.writerow([ch.endpoint_a, ch.endpoint_b, repr(ch.liq_ab), repr(ch.liq_ba),
                    repr(ch.fee_base_ab), repr(ch.fee_rate_ab),
                    repr(ch.fee_base_ba), repr(ch.fee_rate_ba)])
    return buf.getvalue()


def graph_from_csv(text: str, node_count: int | None = None) -> OverlayGraph:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or rows[0] != GRAPH_CSV_HEADER:
        raise ValueError("edge list must start with header " + ",".join(GRAPH_CSV_HEADER))
    edges = [(int(r[0]), int(r[1]), *map(float, r[2:])) for r in rows[1:]]
    n = node_count
    if n is None:
        n = 1 + max((max(e[0], e[1]) for e in edges), default=-1)
    g = OverlayGraph(node_count=n)
    for a, b, lab, lba, al_ab, be_ab, al_ba, be_ba in edges:
        cid = open_channel(g, a, b, lab, lba)
        ch = g.channels[cid]
        ch.set_fees(True, al_ab, be_ab)
        ch.set_fees(False, al_ba, be_ba)
    g.onchain_op_count = 0
    return g

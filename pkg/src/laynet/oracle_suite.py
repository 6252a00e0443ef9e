"""Brute-force reference implementations, independent of the production solvers.

Nothing here calls routing, agents or rebalance code: costs, feasibility and
path enumeration are recomputed straight from ChannelState fields, so an
equivalence test against production code compares two separate derivations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import OracleLimitExceeded
from .overlay import GRAPH_CSV_HEADER, OverlayGraph, graph_from_csv, graph_to_csv

ORACLE_NODE_CAP = 10
ORACLE_TRIALS = 100_000


def _pairs(g: OverlayGraph) -> dict[int, list[tuple[int, int]]]:
    """node -> sorted list of (neighbour, channel id), built from raw channel records."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for cid, ch in g.channels.items():
        adj.setdefault(ch.endpoint_a, []).append((ch.endpoint_b, cid))
        adj.setdefault(ch.endpoint_b, []).append((ch.endpoint_a, cid))
    for lst in adj.values():
        lst.sort()
    return adj


def oracle_all_paths(g: OverlayGraph, src: int, dst: int,
                     cap: int = ORACLE_NODE_CAP) -> list[tuple[int, ...]]:
    """Every simple path from src to dst as a node tuple, by depth-first search."""
    if g.node_count > cap:
        raise OracleLimitExceeded(f"{g.node_count} nodes exceeds the oracle cap of {cap}")
    if src == dst:
        return [(src,)]
    adj = _pairs(g)
    out = []
    stack = [(src, (src,))]
    while stack:
        u, nodes = stack.pop()
        for v, _ in reversed(adj.get(u, [])):
            if v in nodes:
                continue
            if v == dst:
                out.append(nodes + (v,))
            else:
                stack.append((v, nodes + (v,)))
    return sorted(out)


def _directed(g: OverlayGraph, u: int, v: int):
    for ch in g.channels.values():
        if ch.endpoint_a == u and ch.endpoint_b == v:
            return ch.liq_ab, ch.fee_base_ab, ch.fee_rate_ab
        if ch.endpoint_b == u and ch.endpoint_a == v:
            return ch.liq_ba, ch.fee_base_ba, ch.fee_rate_ba
    raise KeyError((u, v))


def oracle_cost(g: OverlayGraph, nodes: Sequence[int], amount: float) -> float:
    cost = 0.0
    for u, v in zip(nodes, nodes[1:]):
        _, alpha, beta = _directed(g, u, v)
        cost += alpha + beta * amount
    return cost


def oracle_feasible(g: OverlayGraph, nodes: Sequence[int], amount: float, margin: float) -> bool:
    need = amount
    for u, v in reversed(list(zip(nodes, nodes[1:]))):
        liq, alpha, beta = _directed(g, u, v)
        if liq < need + margin:
            return False
        need = need + (alpha + beta * need)
    return True


def oracle_best_path(g: OverlayGraph, src: int, dst: int, amount: float,
                     margin: float = 0.0) -> Optional[tuple[float, int, tuple[int, ...]]]:
    """(cost, hops, nodes) of the best feasible path, or None."""
    best = None
    for nodes in oracle_all_paths(g, src, dst):
        if not oracle_feasible(g, nodes, amount, margin):
            continue
        key = (oracle_cost(g, nodes, amount), len(nodes) - 1, nodes)
        if best is None or key < best:
            best = key
    return best


def oracle_monopoly_fee(policy, grid: Optional[Sequence[float]] = None) -> float:
    """Grid argmax of (f - c1) * lambda0 * f**-eta - c0, by default on the policy's own fee grid."""
    if grid is None:
        grid = np.linspace(policy.fee_floor, policy.fee_cap, policy.fee_grid_points)
    best_f, best_v = None, -math.inf
    for f in grid:
        f = float(f)
        v = (f - policy.reserve_marginal) * policy.demand_scale * f ** (-policy.demand_elasticity) \
            - policy.reserve_fixed
        if v > best_v:
            best_f, best_v = f, v
    return best_f


@dataclass(frozen=True)
class MonteCarloEstimate:
    rate: float
    low: float
    high: float
    trials: int

    def covers(self, value: float) -> bool:
        return self.low <= value <= self.high


def oracle_success_analytic(liquidities: Sequence[float], decay_rate: float) -> float:
    return math.prod(1.0 - math.exp(-decay_rate * ell) for ell in liquidities)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def oracle_success_mc(liquidities: Sequence[float], decay_rate: float,
                      trials: int = ORACLE_TRIALS, seed: int = 0) -> MonteCarloEstimate:
    """Empirical path success with independent per-hop failures p_i = exp(-k * l_i)."""
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    rng = np.random.Generator(np.random.Philox(seed))
    fail_p = np.exp(-decay_rate * np.asarray(liquidities, dtype=float))
    draws = rng.random((trials, len(fail_p)))
    ok = int(np.all(draws >= fail_p, axis=1).sum())
    lo, hi = wilson_interval(ok, trials)
    return MonteCarloEstimate(ok / trials, lo, hi, trials)


@dataclass
class InstanceDump:
    """A seeded problem instance: an edge list plus ``# key=value`` header lines."""

    edges: list[tuple]  # rows matching the overlay edge-list columns
    node_count: int
    params: dict[str, str] = field(default_factory=dict)

    def graph(self) -> OverlayGraph:
        rows = [",".join(GRAPH_CSV_HEADER)]
        rows += [",".join(repr(x) if isinstance(x, float) else str(x) for x in e) for e in self.edges]
        return graph_from_csv("\n".join(rows) + "\n", self.node_count)

    def to_text(self) -> str:
        head = [f"# node_count={self.node_count}"]
        head += [f"# {k}={v}" for k, v in self.params.items()]
        g = self.graph()
        return "\n".join(head) + "\n" + graph_to_csv(g)

    @classmethod
    def from_text(cls, text: str) -> "InstanceDump":
        params: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("# ") and "=" in line:
                k, _, v = line[2:].partition("=")
                params[k.strip()] = v.strip()
            elif line.strip():
                body.append(line)
        n = int(params.pop("node_count"))
        g = graph_from_csv("\n".join(body) + "\n", n)
        return cls.from_graph(g, params)

    @classmethod
    def from_graph(cls, g: OverlayGraph, params: Optional[dict] = None) -> "InstanceDump":
        edges = []
        for cid in sorted(g.channels):
            ch = g.channels[cid]
            edges.append((ch.endpoint_a, ch.endpoint_b, float(ch.liq_ab), float(ch.liq_ba),
                          float(ch.fee_base_ab), float(ch.fee_rate_ab),
                          float(ch.fee_base_ba), float(ch.fee_rate_ba)))
        return cls(edges, g.node_count, {k: str(v) for k, v in (params or {}).items()})


def routing_instance(seed: int, max_nodes: int = 8) -> InstanceDump:
    """Random graph with small integer liquidity and fees, so exact cost ties occur."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = int(rng.integers(2, max_nodes + 1))
    p = float(rng.uniform(0.3, 0.9))
    edges = []
    for a, b in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.append((a, b, float(rng.integers(0, 21)), float(rng.integers(1, 21)),
                          float(rng.integers(0, 3)), float(rng.choice([0.0, 0.01, 0.05])),
                          float(rng.integers(0, 3)), float(rng.choice([0.0, 0.01, 0.05]))))
    src, dst = (int(x) for x in rng.choice(n, size=2, replace=False))
    params = {"kind": "routing", "seed": seed, "src": src, "dst": dst,
              "amount": float(rng.integers(1, 11)), "margin": float(rng.integers(0, 2))}
    return InstanceDump(edges, n, {k: str(v) for k, v in params.items()})


def rebalance_instance(seed: int, nodes: int = 6, p: float = 0.5, max_units: int = 3) -> InstanceDump:
    """Random graph with even integer capacities and a random split, quantum 1."""
    rng = np.random.Generator(np.random.Philox(seed))
    edges = []
    for a, b in itertools.combinations(range(nodes), 2):
        if rng.random() < p:
            cap = 2 * int(rng.integers(1, max_units + 1))
            la = int(rng.integers(0, cap + 1))
            edges.append((a, b, float(la), float(cap - la),
                          float(rng.integers(0, 3)), 0.0, float(rng.integers(0, 3)), 0.0))
    if not edges:
        edges.append((0, 1, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    return InstanceDump(edges, nodes, {"kind": "rebalance", "seed": str(seed), "quantum": "1.0"})

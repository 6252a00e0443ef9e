"""Feasibility-aware path search over the channel graph.

Paths are ranked by the selection cost ``sum(alpha + beta * amount)`` with
ties broken by hop count and then by the node-id sequence. Feasibility uses
the backward-accumulated forward amounts that execution will actually move.

Search runs Dijkstra on the composite key over hops that could possibly carry
the payment. If that path fails the full feasibility check, paths are
enumerated best-first in key order until one is feasible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import count
from typing import Callable, Iterator, Optional

from .errors import Disconnected, OracleLimitExceeded, RoutingError
from .overlay import Hop, OverlayGraph, forward_amounts

# (channel_id, forward) -> liquidity the searcher believes is available
LiquidityView = Callable[[int, bool], float]

ORACLE_NODE_LIMIT = 10
DEFAULT_MAX_EXPANSIONS = 200_000


@dataclass(frozen=True)
class Path:
    source: int
    dest: int
    hops: tuple[Hop, ...] = ()
    nodes: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.nodes:
            object.__setattr__(self, "nodes", (self.source,))
        if not self.hops and self.source != self.dest:
            raise RoutingError("a zero-hop path needs source == dest")
        if len(set(self.nodes)) != len(self.nodes):
            raise RoutingError("path repeats a node")

    def __len__(self):
        return len(self.hops)


@dataclass(frozen=True)
class SuccessModel:
    decay_rate: float = 1.0

    def __post_init__(self):
        if self.decay_rate <= 0:
            raise ValueError("decay_rate must be positive")

    def hop_success(self, liquidity: float) -> float:
        return 1.0 - math.exp(-self.decay_rate * liquidity)


def make_path(g: OverlayGraph, nodes) -> Path:
    nodes = tuple(nodes)
    hops = []
    for u, v in zip(nodes, nodes[1:]):
        cid = g.channel_between(u, v)
        if cid is None:
            raise RoutingError(f"no channel between {u} and {v}")
        hops.append(g.hop_from(cid, u))
    return Path(nodes[0], nodes[-1], tuple(hops), nodes)


def _true_view(g: OverlayGraph) -> LiquidityView:
    return lambda cid, fwd: g.channels[cid].liquidity(fwd)


def _unbounded_view(cid: int, fwd: bool) -> float:
    return math.inf


def hop_weight(g: OverlayGraph, hop: Hop, amount: float) -> float:
    cid, fwd = hop
    return g.channels[cid].hop_fee(fwd, amount)


def path_cost(g: OverlayGraph, path: Path, amount: float) -> float:
    cost = 0.0
    for hop in path.hops:
        cost += hop_weight(g, hop, amount)
    return cost


def feasible(g: OverlayGraph, path: Path, amount: float, margin: float = 0.0,
             view: Optional[LiquidityView] = None) -> bool:
    view = view or _true_view(g)
    carried, _ = forward_amounts(g, path.hops, amount)
    return all(view(cid, fwd) >= carried[i] + margin for i, (cid, fwd) in enumerate(path.hops))


def _check_nodes(g: OverlayGraph, src: int, dst: int) -> None:
    for n in (src, dst):
        if not g.has_node(n):
            raise RoutingError(f"unknown node {n}")


def _usable_hops(g: OverlayGraph, u: int, amount: float, margin: float, view: LiquidityView):
    # every hop carries at least `amount`, so thinner hops can never be on a feasible path
    need = amount + margin
    for v, cid in g.neighbors(u).items():
        fwd = g.channels[cid].endpoint_a == u
        if view(cid, fwd) >= need:
            yield v, (cid, fwd)


def _dijkstra(g: OverlayGraph, src: int, dst: int, amount: float, margin: float,
              view: LiquidityView) -> Optional[Path]:
    best: dict[int, tuple] = {src: (0.0, 0, (src,))}
    back: dict[int, tuple] = {src: ()}
    heap = [(0.0, 0, (src,))]
    done = set()
    while heap:
        key = heapq.heappop(heap)
        cost, nh, nodes = key
        u = nodes[-1]
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return Path(src, dst, back[u], nodes)
        for v, hop in _usable_hops(g, u, amount, margin, view):
            if v in done:
                continue
            cand = (cost + hop_weight(g, hop, amount), nh + 1, nodes + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                back[v] = back[u] + (hop,)
                heapq.heappush(heap, cand)
    return None


def iter_paths_by_cost(g: OverlayGraph, src: int, dst: int, amount: float, margin: float = 0.0,
                       view: Optional[LiquidityView] = None,
                       max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> Iterator[Path]:
    """Yield simple paths from src to dst in non-decreasing (cost, hops, nodes) order."""
    view = view or _true_view(g)
    tick = count()
    heap = [((0.0, 0, (src,)), next(tick), ())]
    expansions = 0
    while heap:
        key, _, hops = heapq.heappop(heap)
        cost, nh, nodes = key
        u = nodes[-1]
        if u == dst:
            yield Path(src, dst, hops, nodes)
            continue
        expansions += 1
        if expansions > max_expansions:
            raise RoutingError(f"path enumeration exceeded {max_expansions} expansions")
        for v, hop in _usable_hops(g, u, amount, margin, view):
            if v in nodes:
                continue
            heapq.heappush(heap, ((cost + hop_weight(g, hop, amount), nh + 1, nodes + (v,)),
                                  next(tick), hops + (hop,)))


def best_path(g: OverlayGraph, src: int, dst: int, amount: float, margin: float = 0.0,
              view: Optional[LiquidityView] = None,
              max_expansions: int = DEFAULT_MAX_EXPANSIONS) -> Optional[Path]:
    """Minimum-cost feasible path, or None when no feasible route exists."""
    _check_nodes(g, src, dst)
    if src == dst:
        return Path(src, dst)
    view = view or _true_view(g)
    p = _dijkstra(g, src, dst, amount, margin, view)
    if p is None:
        return None
    if feasible(g, p, amount, margin, view):
        return p
    for p in iter_paths_by_cost(g, src, dst, amount, margin, view, max_expansions):
        if feasible(g, p, amount, margin, view):
            return p
    return None


def path_key(g: OverlayGraph, path: Path, amount: float) -> tuple:
    return (path_cost(g, path, amount), len(path.hops), path.nodes)


def brute_force_best_path(g: OverlayGraph, src: int, dst: int, amount: float, margin: float = 0.0,
                          node_limit: int = ORACLE_NODE_LIMIT) -> Optional[Path]:
    """Reference argmin over every simple path; only for small graphs."""
    if g.node_count > node_limit:
        raise OracleLimitExceeded(f"{g.node_count} nodes exceeds the oracle limit of {node_limit}")
    _check_nodes(g, src, dst)
    if src == dst:
        return Path(src, dst)
    best, best_key = None, None

    def walk(u, nodes, hops):
        nonlocal best, best_key
        if u == dst:
            p = Path(src, dst, tuple(hops), tuple(nodes))
            if feasible(g, p, amount, margin):
                k = path_key(g, p, amount)
                if best_key is None or k < best_key:
                    best, best_key = p, k
            return
        for v, cid in sorted(g.neighbors(u).items()):
            if v in nodes:
                continue
            nodes.append(v)
            hops.append(g.hop_from(cid, u))
            walk(v, nodes, hops)
            nodes.pop()
            hops.pop()

    walk(src, [src], [])
    return best


def fragmentation_penalty(g: OverlayGraph, src: int, dst: int, amount: float,
                          margin: float = 0.0) -> float:
    """Extra cost of the best feasible path over the best path with unlimited liquidity."""
    ideal = best_path(g, src, dst, amount, margin, view=_unbounded_view)
    if ideal is None:
        raise Disconnected(f"no path between {src} and {dst}")
    real = best_path(g, src, dst, amount, margin)
    if real is None:
        return math.inf
    return max(0.0, path_cost(g, real, amount) - path_cost(g, ideal, amount))


def success_from_liquidity(liquidities, model: SuccessModel) -> float:
    p = 1.0
    for ell in liquidities:
        p *= model.hop_success(ell)
    return p


def success_probability(g: OverlayGraph, path: Path, model: SuccessModel) -> float:
    return success_from_liquidity((g.channels[c].liquidity(f) for c, f in path.hops), model)


def critical_liquidity(model: SuccessModel, epsilon: float) -> float:
    """Liquidity at which per-hop success equals ``epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return -math.log1p(-epsilon) / model.decay_rate


def shortest_path_tree(g: OverlayGraph, src: int, amount: float, margin: float = 0.0,
                       view: Optional[LiquidityView] = None) -> dict[int, Path]:
    """Cheapest path (by the same key) from ``src`` to every reachable node.

    Liquidity is only used to prune hops thinner than ``amount + margin``.
    """
    view = view or _true_view(g)
    best = {src: (0.0, 0, (src,))}
    back = {src: ()}
    heap = [(0.0, 0, (src,))]
    out: dict[int, Path] = {}
    while heap:
        cost, nh, nodes = heapq.heappop(heap)
        u = nodes[-1]
        if u in out:
            continue
        out[u] = Path(src, u, back[u], nodes)
        for v, hop in _usable_hops(g, u, amount, margin, view):
            if v in out:
                continue
            cand = (cost + hop_weight(g, hop, amount), nh + 1, nodes + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                back[v] = back[u] + (hop,)
                heapq.heappush(heap, cand)
    return out

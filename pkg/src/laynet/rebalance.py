"""Circular rebalancing toward a target liquidity allocation.

Pushing ``a`` around a directed cycle lowers every hop's forward liquidity by
``a`` and raises the reverse side by ``a``; channel capacities and every node's
total balance are unchanged. The objective is the L1 distance to the target.

``exact_rebalance`` searches the whole integer circulation space (in units of
``flow_quantum``) through a fundamental-cycle basis, which is exponential in the
number of independent cycles. ``greedy_rebalance`` is the tractable heuristic.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import OracleLimitExceeded
from .overlay import Hop, OverlayGraph

EXACT_NODE_CAP = 8
EXACT_STATE_CAP = 4_000_000
_EPS = 1e-9

Target = dict[Hop, float]


@dataclass
class RebalanceProblem:
    graph: OverlayGraph
    target: Target
    flow_quantum: float = 1.0

    def __post_init__(self):
        if self.flow_quantum <= 0:
            raise ValueError("flow_quantum must be positive")
        for cid, ch in self.graph.channels.items():
            ta, tb = self.target.get((cid, True)), self.target.get((cid, False))
            if ta is None or tb is None:
                continue
            if abs(ta + tb - ch.capacity) > 1e-9 * max(1.0, ch.capacity) or ta < 0 or tb < 0:
                raise ValueError(f"target for channel {cid} does not respect its capacity")


@dataclass
class RebalancePlan:
    steps: list[tuple[tuple[int, ...], float]] = field(default_factory=list)
    deviation: float = 0.0
    fee_cost: float = 0.0


def balanced_target(g: OverlayGraph) -> Target:
    target = {}
    for cid, ch in g.channels.items():
        target[(cid, True)] = ch.capacity / 2
        target[(cid, False)] = ch.capacity / 2
    return target


def deviation(g: OverlayGraph, target: Target) -> float:
    total = 0.0
    for (cid, fwd), t in target.items():
        ch = g.channels.get(cid)
        if ch is not None:
            total += abs(ch.liquidity(fwd) - t)
    return total


def cycle_hops(g: OverlayGraph, cycle: tuple[int, ...]) -> list[Hop]:
    hops = []
    for u, v in zip(cycle, cycle[1:] + cycle[:1]):
        cid = g.channel_between(u, v)
        if cid is None:
            raise ValueError(f"cycle uses missing channel ({u}, {v})")
        hops.append(g.hop_from(cid, u))
    return hops


def apply_plan(g: OverlayGraph, plan: RebalancePlan) -> None:
    for cycle, amount in plan.steps:
        hops = cycle_hops(g, cycle)
        for cid, fwd in hops:
            if g.channels[cid].liquidity(fwd) < amount - _EPS:
                raise ValueError(f"plan overdraws channel {cid}")
        for cid, fwd in hops:
            ch = g.channels[cid]
            ch.shift(fwd, amount)
            # clamp float dust introduced by repeated quantum shifts
            if ch.liq_ab < 0:
                ch.liq_ab, ch.liq_ba = 0.0, ch.capacity
            elif ch.liq_ba < 0:
                ch.liq_ab, ch.liq_ba = ch.capacity, 0.0


def _projected(p: RebalanceProblem, steps) -> RebalancePlan:
    g = p.graph.copy()
    plan = RebalancePlan(list(steps))
    apply_plan(g, plan)
    plan.deviation = deviation(g, p.target)
    plan.fee_cost = sum(
        sum(p.graph.channels[c].hop_fee(f, amt) for c, f in cycle_hops(p.graph, cyc))
        for cyc, amt in plan.steps)
    return plan


def _channel_terms(p: RebalanceProblem, cid: int):
    ch = p.graph.channels[cid]
    ta = p.target.get((cid, True))
    tb = p.target.get((cid, False))
    return ch, ta, tb


def _spanning_forest(g: OverlayGraph):
    """Tree edges (child, parent, cid) in BFS order, plus the list of chord channel ids."""
    seen = set()
    tree = []
    tree_ids = set()
    for root in g.nodes:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, cid in sorted(g.neighbors(u).items()):
                if v not in seen:
                    seen.add(v)
                    tree.append((v, u, cid))
                    tree_ids.add(cid)
                    queue.append(v)
    chords = sorted(cid for cid in g.channels if cid not in tree_ids)
    return tree, chords


def _cycle_matrix(g: OverlayGraph, tree, chords, cids):
    """Column j gives every channel's flow (a->b positive) for one unit on chord j."""
    index = {cid: i for i, cid in enumerate(cids)}
    B = np.zeros((len(cids), len(chords)), dtype=np.int64)
    for j, chord in enumerate(chords):
        partial: dict[int, int] = {}
        ch = g.channels[chord]
        B[index[chord], j] = 1
        partial[ch.endpoint_a] = partial.get(ch.endpoint_a, 0) + 1
        partial[ch.endpoint_b] = partial.get(ch.endpoint_b, 0) - 1
        for child, parent, cid in reversed(tree):
            s = partial.get(child, 0)
            if s == 0:
                continue
            t = g.channels[cid]
            z = -s if t.endpoint_a == child else s
            B[index[cid], j] = z
            partial[child] = 0
            sign = 1 if t.endpoint_a == parent else -1
            partial[parent] = partial.get(parent, 0) + sign * z
    return B


def _decompose(g: OverlayGraph, cids, z) -> list[tuple[tuple[int, ...], int]]:
    """Split an integer circulation into simple cycles whose flows agree in sign with it."""
    flow: dict[tuple[int, int], int] = {}
    for cid, units in zip(cids, z):
        if units == 0:
            continue
        ch = g.channels[cid]
        if units > 0:
            flow[(ch.endpoint_a, ch.endpoint_b)] = int(units)
        else:
            flow[(ch.endpoint_b, ch.endpoint_a)] = int(-units)
    cycles = []
    while flow:
        start = min(flow)[0]
        walk = [start]
        pos = {start: 0}
        while True:
            u = walk[-1]
            v = min(b for (a, b) in flow if a == u)
            if v in pos:
                cyc = walk[pos[v]:]
                break
            pos[v] = len(walk)
            walk.append(v)
        edges = list(zip(cyc, cyc[1:] + cyc[:1]))
        amt = min(flow[e] for e in edges)
        for e in edges:
            flow[e] -= amt
            if flow[e] == 0:
                del flow[e]
        cycles.append((tuple(cyc), amt))
    return cycles


def exact_rebalance(p: RebalanceProblem, node_cap: int = EXACT_NODE_CAP,
                    state_cap: int = EXACT_STATE_CAP) -> RebalancePlan:
    g = p.graph
    if g.node_count > node_cap:
        raise OracleLimitExceeded(
            f"{g.node_count} nodes exceeds the exact solver cap of {node_cap}; use greedy_rebalance")
    q = p.flow_quantum
    cids = sorted(g.channels)
    if not cids:
        return RebalancePlan([], 0.0)
    tree, chords = _spanning_forest(g)
    start_dev = deviation(g, p.target)
    if not chords:
        return RebalancePlan([], start_dev)

    lo = np.empty(len(cids))
    hi = np.empty(len(cids))
    la = np.empty(len(cids))
    lb = np.empty(len(cids))
    ta = np.full(len(cids), np.nan)
    tb = np.full(len(cids), np.nan)
    for i, cid in enumerate(cids):
        ch, a, b = _channel_terms(p, cid)
        lo[i] = -math.floor(ch.liq_ba / q + _EPS)
        hi[i] = math.floor(ch.liq_ab / q + _EPS)
        la[i], lb[i] = ch.liq_ab, ch.liq_ba
        if a is not None:
            ta[i] = a
        if b is not None:
            tb[i] = b
    B = _cycle_matrix(g, tree, chords, cids)
    chord_pos = [cids.index(c) for c in chords]
    ranges = [range(int(lo[i]), int(hi[i]) + 1) for i in chord_pos]
    size = 1
    for r in ranges:
        size *= len(r)
    if size > state_cap:
        raise OracleLimitExceeded(
            f"exact search space of {size} circulations exceeds {state_cap}; use greedy_rebalance")

    best = (start_dev, 0, None)
    chunk = 1 << 16
    product = itertools.product(*ranges)
    while True:
        block = list(itertools.islice(product, chunk))
        if not block:
            break
        Y = np.asarray(block, dtype=np.int64)
        Z = Y @ B.T
        ok = np.all((Z >= lo) & (Z <= hi), axis=1)
        if not ok.any():
            continue
        Zf = Z[ok] * q
        dev = np.nansum(np.abs(la - Zf - ta), axis=1) + np.nansum(np.abs(lb + Zf - tb), axis=1)
        moved = np.abs(Z[ok]).sum(axis=1)
        order = np.lexsort((moved, np.round(dev, 9)))
        k = order[0]
        cand = (float(dev[k]), int(moved[k]), Z[ok][k])
        if round(cand[0], 9) < round(best[0], 9) or (
                round(cand[0], 9) == round(best[0], 9) and best[2] is not None and cand[1] < best[1]):
            best = cand
    if best[2] is None or not best[2].any():
        return RebalancePlan([], start_dev)
    steps = [(cyc, units * q) for cyc, units in _decompose(g, cids, best[2])]
    return _projected(p, steps)


def _cheapest_return(g: OverlayGraph, src: int, dst: int, skip_cid: int, q: float) -> Optional[list[Hop]]:
    heap = [(0.0, 0, (src,), ())]
    done = set()
    while heap:
        cost, nh, nodes, hops = heapq.heappop(heap)
        u = nodes[-1]
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return list(hops)
        for v, cid in g.neighbors(u).items():
            if cid == skip_cid or v in done:
                continue
            ch = g.channels[cid]
            fwd = ch.endpoint_a == u
            if ch.liquidity(fwd) < q - _EPS:
                continue
            heapq.heappush(heap, (cost + ch.hop_fee(fwd, q), nh + 1, nodes + (v,), hops + ((cid, fwd),)))
    return None


def _push_delta(g: OverlayGraph, target: Target, hops, amount: float) -> float:
    delta = 0.0
    for cid, fwd in hops:
        ch = g.channels[cid]
        t_f, t_r = target.get((cid, fwd)), target.get((cid, not fwd))
        lf, lr = ch.liquidity(fwd), ch.liquidity(not fwd)
        if t_f is not None:
            delta += abs(lf - amount - t_f) - abs(lf - t_f)
        if t_r is not None:
            delta += abs(lr + amount - t_r) - abs(lr - t_r)
    return delta


def greedy_rebalance(p: RebalanceProblem, max_cycles: int = 10) -> RebalancePlan:
    g = p.graph.copy()
    q = p.flow_quantum
    steps = []
    while len(steps) < max_cycles:
        surplus = []
        for (cid, fwd), t in p.target.items():
            ch = g.channels.get(cid)
            if ch is not None and ch.liquidity(fwd) - t > _EPS:
                surplus.append((-(ch.liquidity(fwd) - t), cid, not fwd, fwd))
        surplus.sort()
        pushed = False
        for _, cid, _, fwd in surplus:
            ch = g.channels[cid]
            if ch.liquidity(fwd) < q - _EPS:
                continue
            back = _cheapest_return(g, ch.receiver(fwd), ch.sender(fwd), cid, q)
            if back is None:
                continue
            hops = [(cid, fwd)] + back
            units = math.floor(min(g.channels[c].liquidity(f) for c, f in hops) / q + _EPS)
            best_k, best_delta = 0, -1e-12
            for k in range(1, units + 1):
                d = _push_delta(g, p.target, hops, k * q)
                if d < best_delta - 1e-12:
                    best_k, best_delta = k, d
            if best_k == 0:
                continue
            amount = best_k * q
            cycle = tuple(g.channels[c].sender(f) for c, f in hops)
            apply_plan(g, RebalancePlan([(cycle, amount)]))
            steps.append((cycle, amount))
            pushed = True
            break
        if not pushed:
            break
    return _projected(p, steps)


def plan_to_csv(plan: RebalancePlan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle_nodes", "amount"])
    for cycle, amount in plan.steps:
        w.writerow([";".join(str(n) for n in cycle), repr(amount)])
    return buf.getvalue()


def plan_from_csv(text: str) -> RebalancePlan:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["cycle_nodes", "amount"]:
        raise ValueError("plan CSV must start with header cycle_nodes,amount")
    steps = [(tuple(int(n) for n in r[0].split(";")), float(r[1])) for r in rows[1:] if r]
    return RebalancePlan(steps)

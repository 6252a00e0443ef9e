import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from laynet.errors import Disconnected, OracleLimitExceeded, RoutingError
from laynet.oracle_suite import routing_instance
from laynet.overlay import OverlayGraph, open_channel
from laynet.routing import (Path, SuccessModel, best_path, brute_force_best_path, critical_liquidity,
                            feasible, fragmentation_penalty, iter_paths_by_cost, make_path, path_cost,
                            shortest_path_tree, success_from_liquidity, success_probability)


def chan(g, a, b, lab, lba, alpha=0.0, beta=0.0):
    cid = open_channel(g, a, b, lab, lba)
    g.channels[cid].set_fees(True, alpha, beta)
    g.channels[cid].set_fees(False, alpha, beta)
    return cid


def test_path_cost_examples():
    g = OverlayGraph(node_count=3)
    chan(g, 0, 1, 5000, 5000, 1, 0.001)
    assert path_cost(g, Path(0, 0), 10) == 0
    assert path_cost(g, make_path(g, [0, 1]), 1000) == 2.0
    g = OverlayGraph(node_count=3)
    chan(g, 0, 1, 10, 10, 1, 0)
    chan(g, 1, 2, 10, 10, 2, 0)
    assert path_cost(g, make_path(g, [0, 1, 2]), 123) == 3.0


def test_feasible_examples():
    g = OverlayGraph(node_count=2)
    chan(g, 0, 1, 100, 0)
    assert feasible(g, make_path(g, [0, 1]), 50, 1)
    g.channels[0].liq_ab = 50
    assert not feasible(g, make_path(g, [0, 1]), 50, 1)


def test_feasible_two_hops_backward_amounts():
    g = OverlayGraph(node_count=3)
    chan(g, 0, 1, 11, 0, 1, 0)
    chan(g, 1, 2, 10, 0, 0, 0)
    p = make_path(g, [0, 1, 2])
    assert feasible(g, p, 10, 0)
    # a fee on the last hop is carried by every hop before it
    g.channels[1].set_fees(True, 1, 0)
    assert feasible(g, p, 10, 0)
    g.channels[0].liq_ab = 10.5
    assert not feasible(g, p, 10, 0)


def test_best_path_examples():
    g = OverlayGraph(node_count=4)
    assert best_path(g, 2, 2, 1).hops == ()
    chan(g, 0, 1, 100, 100, 2.0)
    chan(g, 1, 3, 100, 100, 0.0)
    chan(g, 0, 2, 100, 100, 3.0)
    chan(g, 2, 3, 100, 100, 0.0)
    assert best_path(g, 0, 3, 5).nodes == (0, 1, 3)
    g.channels[1].liq_ab = 1
    assert best_path(g, 0, 3, 5).nodes == (0, 2, 3)
    assert best_path(g, 0, 3, 5) == brute_force_best_path(g, 0, 3, 5)


def test_best_path_errors_and_no_route():
    g = OverlayGraph(node_count=2)
    with pytest.raises(RoutingError):
        best_path(g, 0, 5, 1)
    assert best_path(g, 0, 1, 1) is None
    assert brute_force_best_path(g, 0, 1, 1) is None


def test_tie_break_prefers_fewer_hops_then_smaller_ids():
    g = OverlayGraph(node_count=5)
    chan(g, 0, 4, 50, 50, 1.0)
    chan(g, 0, 1, 50, 50, 0.5)
    chan(g, 1, 4, 50, 50, 0.5)
    assert best_path(g, 0, 4, 1).nodes == (0, 4)
    g = OverlayGraph(node_count=4)
    chan(g, 0, 2, 50, 50)
    chan(g, 2, 3, 50, 50)
    chan(g, 0, 1, 50, 50)
    chan(g, 1, 3, 50, 50)
    assert best_path(g, 0, 3, 1).nodes == (0, 1, 3)


def test_dijkstra_candidate_infeasible_uses_enumeration():
    # the cheap route has enough liquidity per hop for the amount but not for
    # the fee that accumulates upstream, so label-setting alone would be wrong
    g = OverlayGraph(node_count=4)
    chan(g, 0, 1, 10.5, 0, 0.0)
    chan(g, 1, 3, 20, 0, 1.0)
    chan(g, 0, 2, 20, 0, 2.0)
    chan(g, 2, 3, 20, 0, 0.0)
    assert best_path(g, 0, 3, 10).nodes == (0, 2, 3)
    assert brute_force_best_path(g, 0, 3, 10).nodes == (0, 2, 3)


def test_brute_force_cap():
    g = OverlayGraph(node_count=11)
    with pytest.raises(OracleLimitExceeded):
        brute_force_best_path(g, 0, 1, 1)


def test_k5_random_liquidity_agreement():
    import numpy as np
    for seed in range(100):
        rng = np.random.default_rng(seed)
        g = OverlayGraph(node_count=5)
        for a, b in itertools.combinations(range(5), 2):
            cid = open_channel(g, a, b, float(rng.uniform(0, 20)), float(rng.uniform(0, 20)))
            g.channels[cid].set_fees(True, float(rng.uniform(0, 2)), float(rng.uniform(0, 0.05)))
            g.channels[cid].set_fees(False, float(rng.uniform(0, 2)), float(rng.uniform(0, 0.05)))
        amt = float(rng.uniform(1, 10))
        a, b = best_path(g, 0, 4, amt), brute_force_best_path(g, 0, 4, amt)
        assert (a is None) == (b is None)
        if a is not None:
            assert path_cost(g, a, amt) == path_cost(g, b, amt)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_brute_force(seed):
    dump = routing_instance(seed, max_nodes=8)
    g = dump.graph()
    p = dump.params
    args = (int(p["src"]), int(p["dst"]), float(p["amount"]), float(p["margin"]))
    assert best_path(g, *args) == brute_force_best_path(g, *args)


def test_iter_paths_is_sorted():
    dump = routing_instance(5, max_nodes=7)
    g = dump.graph()
    keys = [(path_cost(g, p, 3.0), len(p), p.nodes)
            for p in iter_paths_by_cost(g, 0, 1, 3.0, view=lambda c, f: math.inf)]
    assert keys == sorted(keys)


def two_routes(blocked):
    g = OverlayGraph(node_count=4)
    chan(g, 0, 1, 1 if blocked else 100, 100, 1.0)
    chan(g, 1, 3, 100, 100, 0.0)
    chan(g, 0, 2, 100, 100, 2.5)
    chan(g, 2, 3, 100, 100, 0.0)
    return g


def test_fragmentation_penalty():
    assert fragmentation_penalty(two_routes(False), 0, 3, 10) == 0
    assert fragmentation_penalty(two_routes(True), 0, 3, 10) == pytest.approx(1.5)
    g = two_routes(True)
    g.channels[2].liq_ab = 0
    assert fragmentation_penalty(g, 0, 3, 10) == math.inf
    with pytest.raises(Disconnected):
        fragmentation_penalty(OverlayGraph(node_count=2), 0, 1, 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_fragmentation_non_negative(seed):
    dump = routing_instance(seed, max_nodes=6)
    g = dump.graph()
    p = dump.params
    try:
        psi = fragmentation_penalty(g, int(p["src"]), int(p["dst"]), float(p["amount"]))
    except Disconnected:
        return
    assert psi >= 0


def test_success_examples():
    m = SuccessModel(1.0)
    assert success_from_liquidity([0.0], m) == 0.0
    assert success_from_liquidity([500.0, 800.0], m) == 1.0
    assert success_from_liquidity([1.0, 1.0], m) == pytest.approx(0.39958, abs=1e-5)
    g = OverlayGraph(node_count=3)
    chan(g, 0, 1, 1, 0)
    chan(g, 1, 2, 1, 0)
    assert success_probability(g, make_path(g, [0, 1, 2]), m) == pytest.approx((1 - math.exp(-1)) ** 2)


def test_critical_liquidity_examples():
    assert critical_liquidity(SuccessModel(1.0), 0.5) == pytest.approx(0.693147, abs=1e-6)
    assert critical_liquidity(SuccessModel(2.0), 0.99) == pytest.approx(2.302585, abs=1e-6)
    assert critical_liquidity(SuccessModel(1.0), 1e-12) < 1e-11
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            critical_liquidity(SuccessModel(1.0), bad)


@given(st.floats(0.01, 100), st.floats(1e-6, 1 - 1e-6))
def test_critical_liquidity_inverts(k, eps):
    m = SuccessModel(k)
    assert abs(m.hop_success(critical_liquidity(m, eps)) - eps) < 1e-12


@given(st.lists(st.floats(0, 20), min_size=1, max_size=6), st.integers(0, 5), st.floats(0, 5))
def test_success_monotone(liqs, idx, bump):
    m = SuccessModel(0.7)
    idx %= len(liqs)
    raised = list(liqs)
    raised[idx] += bump
    assert success_from_liquidity(raised, m) >= success_from_liquidity(liqs, m)


def test_balanced_split_maximises_success():
    # the product of concave log-successes is Schur-concave: spreading a fixed
    # total evenly across hops is best, and moving toward balance never hurts
    m = SuccessModel(1.0)
    for hops, total in [(2, 10), (3, 9), (3, 12)]:
        splits = [s for s in itertools.product(range(total + 1), repeat=hops) if sum(s) == total]
        probs = {s: success_from_liquidity(s, m) for s in splits}
        best = max(probs.values())
        balanced = [s for s in splits if max(s) - min(s) <= 1]
        assert all(probs[s] == pytest.approx(best) for s in balanced)


def test_shortest_path_tree_matches_best_path():
    dump = routing_instance(11, max_nodes=8)
    g = dump.graph()
    tree = shortest_path_tree(g, 0, 1.0, view=lambda c, f: math.inf)
    for dst, p in tree.items():
        ref = best_path(g, 0, dst, 1.0, view=lambda c, f: math.inf)
        assert p.nodes == ref.nodes

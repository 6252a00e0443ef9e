import copy

import pytest
from hypothesis import given, settings, strategies as st

from laynet.errors import AtomicityFailure, ChannelError, RoutingError
from laynet.overlay import (OverlayGraph, close_channel, enforcement_feasible, execute_payment,
                            graph_from_csv, graph_to_csv, liquidity_share, liquidity_shares,
                            open_channel)
from laynet.routing import Path, make_path


def line(n, liq=100.0, alpha=0.0, beta=0.0):
    g = OverlayGraph(node_count=n)
    for i in range(n - 1):
        cid = open_channel(g, i, i + 1, liq, liq)
        g.channels[cid].set_fees(True, alpha, beta)
        g.channels[cid].set_fees(False, alpha, beta)
    return g


def test_open_channel():
    g = OverlayGraph(node_count=2)
    cid = open_channel(g, 0, 1, 100, 0, onchain_fee=1.0)
    ch = g.channels[cid]
    assert (ch.liq_ab, ch.liq_ba, ch.capacity) == (100, 0, 100)
    assert g.onchain_op_count == 1 and g.onchain_fee_paid == 1.0


def test_open_channel_rejections():
    g = OverlayGraph(node_count=2)
    with pytest.raises(ChannelError):
        open_channel(g, 0, 0, 1, 1)
    open_channel(g, 0, 1, 1, 1)
    with pytest.raises(ChannelError):
        open_channel(g, 1, 0, 1, 1)
    g.add_node()
    with pytest.raises(ChannelError):
        open_channel(g, 0, 2, 0, 0)


def test_close_channel():
    g = OverlayGraph(node_count=2)
    cid = open_channel(g, 0, 1, 100, 0)
    assert close_channel(g, cid, 1.0) == (100, 0)
    assert g.onchain_op_count == 2
    with pytest.raises(ChannelError):
        close_channel(g, cid)


def test_close_after_payment():
    g = OverlayGraph(node_count=2)
    cid = open_channel(g, 0, 1, 100, 0)
    execute_payment(g, make_path(g, [0, 1]), 30)
    assert close_channel(g, cid) == (70, 30)


@pytest.mark.parametrize("v,f,expected", [(50, 60, False), (50, 50, True), (100, 0.2, True)])
def test_enforcement_feasible(v, f, expected):
    assert enforcement_feasible(v, f) is expected


def test_single_hop_payment():
    g = line(2, liq=100)
    execute_payment(g, make_path(g, [0, 1]), 30)
    ch = g.channels[0]
    assert (ch.liq_ab, ch.liq_ba) == (70, 130)


def test_two_hop_fees_accumulate_backward():
    g = line(3, alpha=1.0)
    r = execute_payment(g, make_path(g, [0, 1, 2]), 10)
    assert r.forward_amounts == (11, 10)
    assert r.total_fee == 2
    assert r.paid_fee == 1
    assert g.channels[1].liq_ba == 110  # destination received exactly 10
    assert g.fee_revenue == {1: 1.0}


def test_failed_payment_is_atomic():
    g = line(3)
    g.channels[1].liq_ab = 5
    g.channels[1].capacity = 105
    before = copy.deepcopy(g)
    with pytest.raises(AtomicityFailure) as exc:
        execute_payment(g, make_path(g, [0, 1, 2]), 10)
    assert exc.value.hop_index == 1
    assert g == before


def test_empty_path():
    g = line(2)
    assert execute_payment(g, Path(0, 0), 1).total_fee == 0
    with pytest.raises(RoutingError):
        Path(0, 1)


def test_liquidity_share_examples():
    g = OverlayGraph(node_count=2)
    open_channel(g, 0, 1, 100, 0)
    assert liquidity_share(g, 0) == 1.0
    g = OverlayGraph(node_count=2)
    open_channel(g, 0, 1, 5, 5)
    assert liquidity_shares(g) == [0.5, 0.5]
    g = OverlayGraph(node_count=3)
    open_channel(g, 0, 1, 10, 0)
    open_channel(g, 1, 2, 30, 0)
    open_channel(g, 2, 0, 60, 0)
    assert liquidity_shares(g) == pytest.approx([0.1, 0.3, 0.6])
    with pytest.raises(ValueError):
        liquidity_share(OverlayGraph(node_count=1), 0)


def test_csv_round_trip():
    g = line(4, liq=7.25, alpha=0.5, beta=0.001)
    text = graph_to_csv(g)
    assert text.splitlines()[0] == "a,b,liq_ab,liq_ba,alpha_ab,beta_ab,alpha_ba,beta_ba"
    assert graph_to_csv(graph_from_csv(text)) == text


payments = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.floats(0.1, 60)), max_size=30)


@settings(max_examples=60, deadline=None)
@given(payments, st.floats(0, 2), st.floats(0, 0.05))
def test_capacity_conserved_and_non_negative(pays, alpha, beta):
    g = OverlayGraph(node_count=5)
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]:
        cid = open_channel(g, a, b, 40, 40)
        g.channels[cid].set_fees(True, alpha, beta)
        g.channels[cid].set_fees(False, alpha, beta)
    caps = {cid: ch.capacity for cid, ch in g.channels.items()}
    for s, d, x in pays:
        if s == d:
            continue
        nodes = [s] + ([d] if g.channel_between(s, d) is not None else [(s + 1) % 5, d])
        if len(set(nodes)) != len(nodes) or any(g.channel_between(u, v) is None
                                                  for u, v in zip(nodes, nodes[1:])):
            continue
        before = copy.deepcopy(g)
        try:
            execute_payment(g, make_path(g, nodes), x)
        except AtomicityFailure:
            assert g == before
        for cid, ch in g.channels.items():
            assert ch.liq_ab + ch.liq_ba == pytest.approx(caps[cid], rel=1e-12)
            assert ch.liq_ab >= 0 and ch.liq_ba >= 0
        assert sum(liquidity_shares(g)) == pytest.approx(1.0, abs=1e-12)

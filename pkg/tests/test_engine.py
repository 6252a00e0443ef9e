import math
from dataclasses import replace

import pytest

from laynet.agents import HubPolicy, PricingMode
from laynet.engine import (AttachConfig, DemandSchedule, LogUniform, RebalanceConfig, SimConfig,
                           Topology, TRACE_FIELDS, check_invariants, init_state, inject_liquidity, run,
                           simulate, step, trace_to_csv)
from laynet.errors import ConfigError
from laynet.routing import SuccessModel

SMALL = dict(epochs=15, user_count=12, initial_hub_count=2)


def small(**kw):
    return SimConfig(seed=kw.pop("seed", 5), **{**SMALL, **kw})


def test_no_users_gives_zero_counts():
    frames = run(SimConfig(seed=1, epochs=3, user_count=0, initial_hub_count=2))
    for f in frames:
        assert (f.ln_attempts, f.onchain_count, f.abstentions, f.ln_count, f.opens) == (0, 0, 0, 0, 0)


def test_single_transaction_trace():
    cfg = SimConfig(seed=0, epochs=1, user_count=1, initial_hub_count=1,
                    demand=DemandSchedule("constant", 1.0), valuation=LogUniform(5.0, 5.0),
                    topology=Topology("star"), attach=AttachConfig(enabled=False))
    (f,) = run(cfg)
    assert (f.ln_attempts, f.ln_count, f.onchain_count, f.abstentions) == (1, 1, 0, 0)
    assert f.ln_mean_fee == pytest.approx(cfg.user_policy.forward_fee_base)
    assert f.onchain_fee == 1.0


def test_same_seed_same_trace():
    cfg = small()
    assert trace_to_csv(run(cfg)) == trace_to_csv(run(cfg))
    assert trace_to_csv(run(cfg)) != trace_to_csv(run(replace(cfg, seed=6)))


def test_one_epoch_one_frame():
    assert len(run(small(epochs=1))) == 1


def test_geometric_demand_increases():
    frames = run(SimConfig(seed=2, epochs=200, user_count=4, initial_hub_count=1,
                           attach=AttachConfig(enabled=False)))
    d = [f.demand for f in frames]
    assert all(a < b for a, b in zip(d, d[1:]))


@pytest.mark.parametrize("n", [10, 1e3, 1e6, 1e12])
def test_geometric_schedule_exceeds_any_level(n):
    s = DemandSchedule("geometric", 2.0, 1.01)
    epoch = math.ceil(math.log(n / s.d0) / math.log(s.growth)) + 1
    assert s.at(epoch) > n


def test_linear_schedule_never_negative():
    s = DemandSchedule("linear", 1.0, slope=-0.5)
    assert s.at(10) == 0.0 and s.at(1) == 0.5


def test_trace_header():
    text = trace_to_csv(run(small(epochs=2)))
    assert text.splitlines()[0] == ",".join(TRACE_FIELDS)
    assert TRACE_FIELDS == ["epoch", "demand", "onchain_fee", "ln_mean_fee", "ln_route_failures",
                            "ln_attempts", "abstentions", "onchain_count", "ln_count",
                            "top1_liquidity_share", "topk_liquidity_share", "gini_liquidity",
                            "channel_count", "opens", "closes"]
    assert text.endswith("\n")


SCENARIOS = {
    "star": dict(topology=Topology("star")),
    "ring": dict(topology=Topology("ring")),
    "hubs_directional": dict(topology=Topology("hubs"), flow_pattern="directional",
                             demand=DemandSchedule("constant", 8.0)),
    "hazard": dict(hazard_enabled=True, success_model=SuccessModel(0.05)),
    "liquidity_inverse": dict(hub_policy=HubPolicy(PricingMode.LIQUIDITY_INVERSE)),
    "monopoly": dict(hub_policy=HubPolicy(PricingMode.MONOPOLY, fee_grid_points=2001),
                     hub_overrides={1: HubPolicy()}),
    "global": dict(route_knowledge="global", channel_capacity=10.0),
    "none": dict(route_knowledge="none", channel_capacity=10.0),
    "abandon": dict(hub_policy=HubPolicy(reserve_fixed=5.0), attach=AttachConfig(window=3)),
    "ramp": dict(rebalance=RebalanceConfig(trigger=0.0, quantum=1.0)),
}


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_invariants_hold(name):
    res = simulate(small(**SCENARIOS[name]))
    assert check_invariants(res) == []
    for f in res.frames:
        assert 0 <= f.top1_liquidity_share <= f.topk_liquidity_share <= 1 + 1e-12


def test_abandonment_closes_idle_channels():
    res = simulate(small(**SCENARIOS["abandon"]))
    assert sum(f.closes for f in res.frames) > 0


def test_hazard_causes_failures():
    res = simulate(small(epochs=10, hazard_enabled=True, success_model=SuccessModel(0.01),
                         demand=DemandSchedule("constant", 5.0)))
    assert sum(f.ln_route_failures for f in res.frames) > 0


def test_block_space_caps_onchain():
    cfg = small(route_knowledge="global", channel_capacity=0.2, epochs=5,
                demand=DemandSchedule("constant", 30.0), attach=AttachConfig(enabled=False),
                amount=LogUniform(1.0, 2.0), valuation=LogUniform(100.0, 200.0))
    res = simulate(cfg)
    assert check_invariants(res) == []
    for f in res.frames:
        assert f.onchain_count <= 5
        assert f.abstentions > 0


def test_attachment_opens_hub_channels():
    res = simulate(small(epochs=20))
    assert sum(f.opens for f in res.frames) > 0
    assert res.frames[-1].channel_count > res.frames[0].channel_count - res.frames[0].opens


def test_injection_is_audited():
    cfg = small(epochs=3)
    state = init_state(cfg)
    n = len(state.graph.channels)
    assert inject_liquidity(state, 4.0) == 4.0 * n
    state, _ = step(state, cfg)
    a = state.audit[-1]
    assert a.injected == 4.0 * n
    assert a.capacity_before + a.injected + a.opened - a.closed == pytest.approx(a.capacity_after)


@pytest.mark.parametrize("kw,key", [
    (dict(epochs=0), "epochs"),
    (dict(seed=-1), "seed"),
    (dict(route_knowledge="psychic"), "route_knowledge"),
    (dict(flow_pattern="spiral"), "flow_pattern"),
    (dict(rng="mt19937"), "rng"),
    (dict(hub_overrides={7: HubPolicy()}), "hub.7"),
])
def test_invalid_config(kw, key):
    with pytest.raises(ConfigError) as exc:
        small(**kw)
    assert exc.value.key == key

"""INI scenario files.

Every key has a fixed type; unknown sections or keys are rejected. Syntax and
type errors raise ConfigParseError, semantically invalid values raise
ConfigError. ``[hub.N]`` sections override the ``[hub]`` policy for hub N.

Sections and keys (type in brackets):

* ``[run]`` seed [int, required], epochs [int], user_count [int], hub_count [int],
  margin [float], channel_capacity [float], epoch_seconds [float],
  route_knowledge [none|local|global], route_attempts [int],
  flow_pattern [uniform|directional], rng [philox]
* ``[base]`` block_size_bytes [int], mean_tx_bytes, block_interval_s, base_fee_floor,
  congestion_elasticity, ramp_linear_rate, ramp_penalty_coeff [float],
  cost_model [multiplicative|piecewise_ramp], fee_unit [str]
* ``[demand]`` kind [constant|geometric|linear], d0, growth, slope [float]
* ``[valuation]``, ``[amount]`` min, max [float] (log-uniform bounds)
* ``[user]`` discount_factor, risk_weight, forward_fee_base, forward_fee_rate [float]
* ``[hub]`` pricing_mode [monopoly|competitive|liquidity_inverse], fee_grid_points [int],
  every other HubPolicy field [float]
* ``[topology]`` kind [star|ring|random|hubs], p [float]
* ``[attach]`` enabled [bool], fraction [float], horizon, window [int], user_funding,
  hub_match [float], max_destinations [int]
* ``[rebalance]`` enabled [bool], trigger, quantum [float], max_cycles [int]
* ``[success_model]`` enabled [bool], decay_rate [float]
* ``[ln_fee]`` channel_open_cost, route_fee, rebalance_fee [float], tx_per_channel [int]
* ``[curves]`` d_min, d_max [float], points [int]
* ``[hysteresis]`` stress_demand, relief_demand [float], baseline_epochs, stress_epochs,
  relief_epochs [int]
* ``[failure_sweep]`` demands [comma list of float], seeds [int]
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable

from .agents import HubPolicy, UserPolicy
from .baselayer import BaseParams
from .engine import (AttachConfig, DemandSchedule, LogUniform, RebalanceConfig, SimConfig,
                     Topology)
from .equilibrium import LnFeeModel
from .errors import ConfigError, ConfigParseError
from .routing import SuccessModel


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v: str) -> list[float]:
    return [float(x) for x in v.split(",") if x.strip()]


_HUB_KEYS: dict[str, Callable] = {
    "pricing_mode": str, "reserve_fixed": float, "reserve_marginal": float, "demand_scale": float,
    "demand_elasticity": float, "competitive_slack": float, "lock_cost_rate": float,
    "rebalance_cost_rate": float, "fee_rate": float, "fee_sensitivity": float,
    "fee_floor": float, "fee_cap": float, "fee_grid_points": int,
}

SCHEMA: dict[str, dict[str, Callable]] = {
    "run": {"seed": int, "epochs": int, "user_count": int, "hub_count": int, "margin": float,
            "channel_capacity": float, "epoch_seconds": float, "route_knowledge": str,
            "route_attempts": int, "flow_pattern": str, "rng": str},
    "base": {"block_size_bytes": int, "mean_tx_bytes": float, "block_interval_s": float,
             "base_fee_floor": float, "congestion_elasticity": float, "ramp_linear_rate": float,
             "ramp_penalty_coeff": float, "cost_model": str, "fee_unit": str},
    "demand": {"kind": str, "d0": float, "growth": float, "slope": float},
    "valuation": {"min": float, "max": float},
    "amount": {"min": float, "max": float},
    "user": {"discount_factor": float, "risk_weight": float, "forward_fee_base": float,
             "forward_fee_rate": float},
    "hub": _HUB_KEYS,
    "topology": {"kind": str, "p": float},
    "attach": {"enabled": _bool, "fraction": float, "horizon": int, "window": int,
               "user_funding": float, "hub_match": float, "max_destinations": int},
    "rebalance": {"enabled": _bool, "trigger": float, "quantum": float, "max_cycles": int},
    "success_model": {"enabled": _bool, "decay_rate": float},
    "ln_fee": {"channel_open_cost": float, "route_fee": float, "rebalance_fee": float,
               "tx_per_channel": int},
    "curves": {"d_min": float, "d_max": float, "points": int},
    "hysteresis": {"stress_demand": float, "relief_demand": float, "baseline_epochs": int,
                   "stress_epochs": int, "relief_epochs": int},
    "failure_sweep": {"demands": _floats, "seeds": int},
}

Raw = dict[str, dict[str, str]]


@dataclass
class CurvesSpec:
    d_min: float = 0.5
    d_max: float = 20.0
    points: int = 40


@dataclass
class Scenario:
    sim: SimConfig
    curves: CurvesSpec = field(default_factory=CurvesSpec)
    hysteresis: dict[str, Any] = field(default_factory=dict)
    failure_sweep: dict[str, Any] = field(default_factory=dict)


def parse_ini(text: str) -> Raw:
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigParseError(f"line {exc.lineno}: duplicate key {exc.option!r}",
                               f"{exc.section}.{exc.option}", exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigParseError(f"line {exc.lineno}: duplicate section [{exc.section}]",
                               exc.section, exc.lineno) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError(f"line {exc.lineno}: key outside any section", None, exc.lineno) from exc
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from exc
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _section_schema(section: str) -> dict[str, Callable]:
    if section in SCHEMA:
        return SCHEMA[section]
    if section.startswith("hub.") and section[4:].isdigit():
        return _HUB_KEYS
    raise ConfigError(f"unknown section [{section}]", section)


def _typed(raw: Raw) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    for section, items in raw.items():
        schema = _section_schema(section)
        typed = {}
        for key, value in items.items():
            if key not in schema:
                raise ConfigError(f"unknown key {section}.{key}", f"{section}.{key}")
            try:
                typed[key] = schema[key](value.strip())
            except ValueError as exc:
                raise ConfigParseError(f"{section}.{key}: cannot read {value!r} ({exc})",
                                       f"{section}.{key}") from exc
        out[section] = typed
    return out


def _hub_policy(values: dict[str, Any], base: HubPolicy | None = None) -> HubPolicy:
    if base is None:
        return HubPolicy(**values)
    merged = {k: getattr(base, k) for k in _HUB_KEYS}
    merged.update(values)
    return HubPolicy(**merged)


def build_scenario(raw: Raw) -> Scenario:
    t = _typed(raw)
    run = dict(t.get("run", {}))
    if "seed" not in run:
        raise ConfigError("missing required key run.seed", "run.seed")
    sim_kwargs: dict[str, Any] = {}
    renames = {"hub_count": "initial_hub_count"}
    for k, v in run.items():
        sim_kwargs[renames.get(k, k)] = v
    try:
        if "base" in t:
            sim_kwargs["base"] = BaseParams(**t["base"])
        if "demand" in t:
            sim_kwargs["demand"] = DemandSchedule(**t["demand"])
        for name in ("valuation", "amount"):
            if name in t:
                d = SimConfig.__dataclass_fields__[name].default_factory()
                sim_kwargs[name] = LogUniform(t[name].get("min", d.low), t[name].get("max", d.high))
        if "user" in t:
            sim_kwargs["user_policy"] = UserPolicy(**t["user"])
        hub = _hub_policy(t.get("hub", {}))
        sim_kwargs["hub_policy"] = hub
        sim_kwargs["hub_overrides"] = {int(s[4:]): _hub_policy(v, hub)
                                       for s, v in sorted(t.items()) if s.startswith("hub.")}
        if "topology" in t:
            sim_kwargs["topology"] = Topology(**t["topology"])
        if "attach" in t:
            sim_kwargs["attach"] = AttachConfig(**t["attach"])
        if "rebalance" in t:
            sim_kwargs["rebalance"] = RebalanceConfig(**t["rebalance"])
        sm = dict(t.get("success_model", {}))
        sim_kwargs["hazard_enabled"] = sm.pop("enabled", False)
        if sm:
            sim_kwargs["success_model"] = SuccessModel(**sm)
        if "ln_fee" in t:
            sim_kwargs["ln_fee"] = LnFeeModel(**t["ln_fee"])
        sim = SimConfig(**sim_kwargs)
        curves = CurvesSpec(**t.get("curves", {}))
        if not 0 < curves.d_min < curves.d_max or curves.points < 2:
            raise ConfigError("curves need 0 < d_min < d_max and at least 2 points", "curves")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(sim, curves, t.get("hysteresis", {}), t.get("failure_sweep", {}))


def load_raw(path) -> tuple[str, Raw]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return text, parse_ini(text)


def load_scenario(path) -> Scenario:
    _, raw = load_raw(path)
    return build_scenario(raw)


def load_config(path) -> SimConfig:
    return load_scenario(path).sim


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def override(raw: Raw, param: str, value: str) -> Raw:
    """Copy of ``raw`` with ``section.key`` set to ``value``; unknown keys raise ConfigError."""
    section, _, key = param.partition(".")
    if not key:
        raise ConfigError(f"sweep parameter {param!r} must look like section.key", param)
    if key not in _section_schema(section):
        raise ConfigError(f"unknown sweep parameter {param!r}", param)
    out = {s: dict(v) for s, v in raw.items()}
    out.setdefault(section, {})[key] = value
    return out

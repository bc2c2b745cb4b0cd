"""Scenario files: schema, validation, and realization.

A scenario is a YAML document naming a topology, channel count, weight
source, optional fixed policy, arrival model, simulation settings, and
an optional sweep grid. Parsing reports the offending field path in
every error so a bad file is diagnosable from the message alone.

The scenario hash pins the full effective configuration (after CLI
overrides); reports embed it so an output file can be traced back to
exactly what produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .fairness import TransmitPolicy, weights_from_queues
from .topology import (build_network, chain_network, conflict_sets,
                       random_network, star_network)

SIM_MODES = ("saturated", "queued", "adaptive")
WEIGHT_SOURCES = ("explicit", "queues", "arrival-driven")
TOPOLOGY_KINDS = ("star", "chain", "random", "explicit")


class ScenarioError(ValueError):
    """Parse or validation failure, addressed to a field path."""

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


def _require(cond, field, message):
    if not cond:
        raise ScenarioError(field, message)


def _as_int(value, field, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(field, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(field, f"must be >= {minimum}, got {value}")
    return value


def _as_number(value, field, minimum=None, maximum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(field, f"expected a number, got {value!r}")
    v = float(value)
    if minimum is not None and v < minimum:
        raise ScenarioError(field, f"must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ScenarioError(field, f"must be <= {maximum}, got {v}")
    return v


def _as_mapping(value, field):
    if not isinstance(value, dict):
        raise ScenarioError(field, f"expected a mapping, got {type(value).__name__}")
    return value


def _scalar_or_list(value, field, minimum=None, maximum=None):
    """Normalize a broadcastable numeric field to float or list of floats."""
    if isinstance(value, list):
        return [_as_number(v, f"{field}[{i}]", minimum, maximum)
                for i, v in enumerate(value)]
    return _as_number(value, field, minimum, maximum)


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: dict
    channels: int
    weights: dict
    policy_tau: object  # float, list, or None
    arrivals: dict | None
    mode: str
    slots: int
    seed: int
    replications: int
    epoch_length: int
    e_tx: float
    sweep: dict | None
    output_path: str | None


@dataclass(frozen=True)
class Realized:
    """A scenario grounded to one concrete network size."""

    net: object
    conflicts: object
    weights: np.ndarray
    arrival_rates: np.ndarray | None
    policy: TransmitPolicy | None


def parse_scenario(doc, name="scenario"):
    doc = _as_mapping(doc, "<document>")
    known = {"name", "topology", "channels", "weights", "policy",
             "arrivals", "sim", "sweep", "output"}
    for key in doc:
        _require(key in known, str(key), "unknown top-level field")

    if "name" in doc:
        _require(isinstance(doc["name"], str), "name", "expected a string")
        name = doc["name"]

    topo_raw = _as_mapping(doc.get("topology"), "topology") \
        if "topology" in doc else None
    _require(topo_raw is not None, "topology", "required field is missing")
    kind = topo_raw.get("kind")
    _require(kind in TOPOLOGY_KINDS,
             "topology.kind", f"expected one of {TOPOLOGY_KINDS}, got {kind!r}")
    topology = {"kind": kind}
    if kind in ("star", "chain", "random"):
        topology["nodes"] = _as_int(topo_raw.get("nodes"), "topology.nodes",
                                    minimum=1)
        if kind == "chain":
            _require(topology["nodes"] >= 2, "topology.nodes",
                     "a chain needs at least 2 nodes")
    if kind == "random":
        topology["density"] = _as_number(topo_raw.get("density"),
                                         "topology.density", 0.0, 1.0)
        topology["seed"] = _as_int(topo_raw.get("seed"), "topology.seed",
                                   minimum=0)
    if kind == "explicit":
        topology["node_count"] = _as_int(topo_raw.get("node_count"),
                                         "topology.node_count", minimum=1)
        relays = _as_mapping(topo_raw.get("relays"), "topology.relays")
        interference = _as_mapping(topo_raw.get("interference"),
                                   "topology.interference")
        topology["relays"] = {
            _as_int(k, "topology.relays key"): sorted(
                _as_int(x, f"topology.relays[{k}]") for x in v)
            for k, v in relays.items()}
        topology["interference"] = {
            _as_int(k, "topology.interference key"): sorted(
                _as_int(x, f"topology.interference[{k}]") for x in v)
            for k, v in interference.items()}

    channels = _as_int(doc.get("channels"), "channels", minimum=1)

    weights = {"source": "explicit", "values": 1.0}
    if "weights" in doc:
        wraw = _as_mapping(doc["weights"], "weights")
        source = wraw.get("source")
        _require(source in WEIGHT_SOURCES, "weights.source",
                 f"expected one of {WEIGHT_SOURCES}, got {source!r}")
        weights = {"source": source}
        if source == "explicit":
            _require("values" in wraw, "weights.values",
                     "required for explicit weights")
            weights["values"] = _scalar_or_list(wraw["values"],
                                                "weights.values", minimum=0.0)
        elif source == "queues":
            _require("queues" in wraw, "weights.queues",
                     "required for queue-driven weights")
            weights["queues"] = _scalar_or_list(wraw["queues"],
                                                "weights.queues", minimum=0.0)

    policy_tau = None
    if "policy" in doc:
        praw = _as_mapping(doc["policy"], "policy")
        _require("tau" in praw, "policy.tau", "required field is missing")
        # range is deliberately not enforced here; the validate command
        # reports out-of-range values as a failed domain check
        policy_tau = _scalar_or_list(praw["tau"], "policy.tau")

    arrivals = None
    if "arrivals" in doc:
        araw = _as_mapping(doc["arrivals"], "arrivals")
        if "rates" in araw:
            arrivals = {"rates": _scalar_or_list(araw["rates"],
                                                 "arrivals.rates", minimum=0.0)}
        else:
            _require({"low", "high", "seed"} <= set(araw), "arrivals",
                     "expected either 'rates' or 'low'/'high'/'seed'")
            low = _as_number(araw["low"], "arrivals.low", minimum=0.0)
            high = _as_number(araw["high"], "arrivals.high", minimum=low)
            arrivals = {"low": low, "high": high,
                        "seed": _as_int(araw["seed"], "arrivals.seed",
                                        minimum=0)}

    sim = _as_mapping(doc.get("sim", {}), "sim")
    mode = sim.get("mode", "saturated")
    _require(mode in SIM_MODES, "sim.mode",
             f"expected one of {SIM_MODES}, got {mode!r}")
    slots = _as_int(sim.get("slots", 100_000), "sim.slots", minimum=1)
    seed = _as_int(sim.get("seed", 1), "sim.seed", minimum=0)
    _require(seed < 2**64, "sim.seed", "must fit in 64 bits")
    replications = _as_int(sim.get("replications", 1), "sim.replications",
                           minimum=1)
    epoch_length = _as_int(sim.get("epoch_length", 10_000),
                           "sim.epoch_length", minimum=1)
    e_tx = _as_number(sim.get("e_tx", 1.0), "sim.e_tx", minimum=0.0)

    sweep = None
    if "sweep" in doc:
        sraw = _as_mapping(doc["sweep"], "sweep")
        _require("links" in sraw, "sweep.links", "required field is missing")
        lraw = sraw["links"]
        _require(isinstance(lraw, list) and len(lraw) >= 1, "sweep.links",
                 "expected a list")
        links = [_as_int(v, f"sweep.links[{i}]", minimum=1)
                 for i, v in enumerate(lraw)]
        if len(links) == 2 and links[0] < links[1]:
            links = list(range(links[0], links[1] + 1))
        craw = sraw.get("channels", [channels])
        _require(isinstance(craw, list) and len(craw) >= 1, "sweep.channels",
                 "expected a list")
        chans = [_as_int(v, f"sweep.channels[{i}]", minimum=1)
                 for i, v in enumerate(craw)]
        sweep = {"links": links, "channels": chans}

    output_path = None
    if "output" in doc:
        oraw = _as_mapping(doc["output"], "output")
        if "path" in oraw:
            _require(isinstance(oraw["path"], str), "output.path",
                     "expected a string")
            output_path = oraw["path"]

    return Scenario(name=name, topology=topology, channels=channels,
                    weights=weights, policy_tau=policy_tau,
                    arrivals=arrivals, mode=mode, slots=slots, seed=seed,
                    replications=replications, epoch_length=epoch_length,
                    e_tx=e_tx, sweep=sweep, output_path=output_path)


def load_scenario(path):
    p = Path(path)
    if not p.exists():
        raise ScenarioError("<file>", f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError("<file>", f"not valid YAML: {exc}") from exc
    return parse_scenario(doc, name=p.stem)


def scenario_hash(scenario, seed=None, replications=None):
    """12-hex digest of the effective configuration.

    CLI overrides are applied before hashing so the hash in a report
    always reflects what actually ran. The name and output path carry no
    data and stay out of the hash.
    """
    payload = {
        "topology": scenario.topology,
        "channels": scenario.channels,
        "weights": scenario.weights,
        "policy_tau": scenario.policy_tau,
        "arrivals": scenario.arrivals,
        "mode": scenario.mode,
        "slots": scenario.slots,
        "seed": scenario.seed if seed is None else int(seed),
        "replications": (scenario.replications if replications is None
                         else int(replications)),
        "epoch_length": scenario.epoch_length,
        "e_tx": scenario.e_tx,
        "sweep": scenario.sweep,
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _broadcast(spec, count, field):
    if isinstance(spec, list):
        if len(spec) != count:
            raise ScenarioError(field,
                                f"expected {count} entries, got {len(spec)}")
        return np.array(spec, dtype=float)
    return np.full(count, float(spec))


def build_topology(scenario, links=None, channels=None):
    """Construct the network, optionally overriding size and channels."""
    m = scenario.channels if channels is None else int(channels)
    topo = scenario.topology
    kind = topo["kind"]
    if kind == "explicit":
        if links is not None:
            raise ScenarioError("sweep.links",
                                "explicit topologies cannot be resized")
        return build_network(topo["node_count"], m, topo["relays"],
                             topo["interference"])
    n = topo["nodes"] if links is None else int(links)
    if kind == "star":
        return star_network(n, m)
    if kind == "chain":
        return chain_network(max(n, 2) if links is None else n, m)
    return random_network(n, topo["density"], topo["seed"], m)


def realize(scenario, links=None, channels=None):
    """Ground the scenario to arrays sized for its (possibly overridden)
    network: weights, arrival rates, and the fixed policy if one is given.
    """
    net = build_topology(scenario, links=links, channels=channels)
    conflicts = conflict_sets(net)
    s = net.link_count

    lam = None
    if scenario.arrivals is not None:
        if "rates" in scenario.arrivals:
            lam = _broadcast(scenario.arrivals["rates"], s, "arrivals.rates")
        else:
            rng = np.random.default_rng(scenario.arrivals["seed"])
            lam = rng.uniform(scenario.arrivals["low"],
                              scenario.arrivals["high"], s)

    wspec = scenario.weights
    if wspec["source"] == "explicit":
        weights = _broadcast(wspec["values"], s, "weights.values")
    elif wspec["source"] == "queues":
        queues = _broadcast(wspec["queues"], s, "weights.queues")
        weights = weights_from_queues(queues)
    else:
        if lam is None:
            raise ScenarioError("weights.source",
                                "arrival-driven weights need an arrivals block")
        # steady queues scale with half the arrival rate in the regime the
        # weight map was tuned for; only ratios matter downstream
        weights = np.log1p(lam / 2.0)

    policy = None
    if scenario.policy_tau is not None:
        tau = _broadcast(scenario.policy_tau, s, "policy.tau")
        policy = TransmitPolicy(tau, net.channel_count)

    return Realized(net=net, conflicts=conflicts, weights=weights,
                    arrival_rates=lam, policy=policy)

"""Scenario files: one JSON document describing a whole experiment.

A scenario names the nodes and links, picks a protocol variant and
optional mutations, finitizes the environment for exploration, and may
carry a schedule for simulation.  Both the explorer and the simulator
read the same format, so an exploration counterexample and a simulation
trace always refer to the same network.

Undirected links are the norm: if a node lists a neighbour that does
not list it back, the topology is symmetrized with a warning rather
than rejected.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Optional

from .explore import EnvMenu, env_menu
from .monitor import SuiteError, split_suites
from .network import NetTree, tree_of
from .protocol import VariantConfig
from .simulate import Schedule, ScheduleError, schedule
from .variants import VariantError, apply_mutations, get_variant

MAX_BUDGET = 1000


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    tree: NetTree
    cfg: VariantConfig
    env: EnvMenu
    sched: Optional[Schedule]
    suites: Optional[tuple]
    bound: Optional[int]


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario is not valid JSON: {e}") from None
    name = path.rsplit("/", 1)[-1]
    if name.endswith(".json"):
        name = name[:-5]
    return parse_scenario(obj, name)


def _require(cond, msg):
    if not cond:
        raise ScenarioError(msg)


def _nodes(rows) -> list:
    _require(isinstance(rows, list) and rows, "scenario needs a nonempty 'nodes' list")
    seen = {}
    for row in rows:
        _require(isinstance(row, dict), "each node must be an object")
        extra = set(row) - {"ip", "nbrs"}
        _require(not extra, f"unknown node keys {sorted(extra)}")
        ip = row.get("ip")
        _require(isinstance(ip, int), "node 'ip' must be an integer")
        _require(ip not in seen, f"duplicate node address {ip}")
        nbrs = row.get("nbrs", [])
        _require(isinstance(nbrs, list), "'nbrs' must be a list")
        for n in nbrs:
            _require(isinstance(n, int), "neighbour addresses must be integers")
            _require(n != ip, f"node {ip} lists itself as a neighbour")
        seen[ip] = set(nbrs)
    for ip, nbrs in seen.items():
        for n in nbrs:
            _require(n in seen, f"node {ip} lists unknown neighbour {n}")
    for ip, nbrs in sorted(seen.items()):
        for n in sorted(nbrs):
            if ip not in seen[n]:
                warnings.warn(f"symmetrizing link {ip}-{n}: "
                              f"{n} did not list {ip}")
                seen[n].add(ip)
    return [(ip, frozenset(nbrs)) for ip, nbrs in seen.items()]


def _env(obj, ips) -> EnvMenu:
    if obj is None:
        return env_menu()
    _require(isinstance(obj, dict), "'env' must be an object")
    extra = set(obj) - {"newpkts", "links"}
    _require(not extra, f"unknown env keys {sorted(extra)}")
    rows = []
    for row in obj.get("newpkts", []):
        _require(isinstance(row, dict), "each injection must be an object")
        extra = set(row) - {"ip", "data", "dip", "count"}
        _require(not extra, f"unknown injection keys {sorted(extra)}")
        ip, data, dip = row.get("ip"), row.get("data"), row.get("dip")
        count = row.get("count", 1)
        _require(ip in ips, f"injection at unknown node {ip}")
        _require(dip in ips, f"injection for unknown destination {dip}")
        _require(isinstance(data, str) and data, "injection 'data' must be a nonempty string")
        _require(isinstance(count, int) and 1 <= count <= MAX_BUDGET,
                 f"injection count must be in 1..{MAX_BUDGET}")
        rows.append((ip, data, dip, count))
    links = []
    for ev in obj.get("links", []):
        links.append(_link_event(ev, ips))
    return env_menu(rows, links)


def _link_event(ev, ips):
    _require(isinstance(ev, list) and len(ev) == 3,
             f"link event must be [op, a, b], got {ev!r}")
    op, a, b = ev
    _require(op in ("connect", "disconnect"), f"unknown link op {op!r}")
    _require(a in ips and b in ips, f"link event {ev!r} names unknown nodes")
    _require(a != b, "link event endpoints must differ")
    return (op, a, b)


def _schedule(obj, ips) -> Optional[Schedule]:
    if obj is None:
        return None
    _require(isinstance(obj, dict), "'schedule' must be an object")
    extra = set(obj) - {"seed", "steps", "events"}
    _require(not extra, f"unknown schedule keys {sorted(extra)}")
    seed = obj.get("seed", 0)
    steps = obj.get("steps", 200)
    _require(isinstance(seed, int), "'seed' must be an integer")
    _require(isinstance(steps, int) and steps >= 1, "'steps' must be >= 1")
    events = {}
    for key, spec in (obj.get("events") or {}).items():
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise ScenarioError(f"event index {key!r} is not an integer") from None
        _require(0 <= idx < steps, f"event index {idx} outside 0..{steps - 1}")
        _require(idx not in events, f"two events at step {idx}")
        _require(isinstance(spec, list) and spec, f"bad event {spec!r}")
        if spec[0] == "newpkt":
            _require(len(spec) == 4, "newpkt event must be [\"newpkt\", ip, data, dip]")
            _, ip, data, dip = spec
            _require(ip in ips and dip in ips, f"event {spec!r} names unknown nodes")
            _require(isinstance(data, str) and data, "event data must be a nonempty string")
        else:
            _link_event(spec, ips)
        events[idx] = tuple(spec)
    try:
        return schedule(seed, steps, events)
    except ScheduleError as e:
        raise ScenarioError(str(e)) from None


def parse_scenario(obj: dict, name: str = "scenario") -> Scenario:
    _require(isinstance(obj, dict), "scenario must be a JSON object")
    known = {"nodes", "variant", "mutate", "env", "schedule", "suites", "bound"}
    extra = set(obj) - known
    _require(not extra, f"unknown scenario keys {sorted(extra)}")

    rows = _nodes(obj.get("nodes"))
    ips = {ip for ip, _ in rows}
    tree = tree_of(rows)

    try:
        cfg = get_variant(obj.get("variant", "base"))
        cfg = apply_mutations(cfg, obj.get("mutate", []))
    except VariantError as e:
        raise ScenarioError(str(e)) from None

    env = _env(obj.get("env"), ips)
    sched = _schedule(obj.get("schedule"), ips)

    suites = obj.get("suites")
    if suites is not None:
        _require(isinstance(suites, list), "'suites' must be a list of names")
        try:
            split_suites(suites)
        except SuiteError as e:
            raise ScenarioError(str(e)) from None
        suites = tuple(suites)

    bound = obj.get("bound")
    if bound is not None:
        _require(isinstance(bound, int) and bound >= 0, "'bound' must be >= 0")

    return Scenario(name, tree, cfg, env, sched, suites, bound)

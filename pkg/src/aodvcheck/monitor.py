"""Safety properties evaluated over network states and transitions.

State suites:

  hop-positivity   every route entry records at least one hop
  quality          along a valid route, the next hop's information about
                   the destination is strictly better
  loop-freedom     the per-destination routing graphs are acyclic
  dispatch-msg     at the control location just after the main loop's
                   receive, the msg variable holds a message

Step suites:

  sn-monotone      a node's own sequence number never decreases
  nsqn-monotone    the advertised number for a destination never
                   decreases while the destination stays known
  rerr-grounded    an error message cast to somebody always names at
                   least one unreachable destination

Suite checkers return ``None`` when satisfied and a witness tuple of
plain ints/strings when not, so violations serialize directly into
trace records.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .awn import CastA, Choice, ProcessTable, Receive, SubnetS
from .canon import bdigest
from .messages import Rerr
from .network import GlobalView, net_data, node_states, proc_state
from .routing import (VALID, known_dests, net_seqno, next_hop,
                      strictly_fresher, valid_dests)


class SuiteError(Exception):
    """An unknown suite name was requested."""


@dataclass(frozen=True)
class Verdict:
    holds: bool
    suite: str = ""
    witness: Optional[tuple] = None

    def __post_init__(self):
        if not self.holds and self.witness is None:
            raise ValueError("failing verdict needs a witness")


@dataclass(frozen=True)
class RtGraph:
    dip: int
    arcs: frozenset  # (ip, next hop) pairs


def rt_graph(sigma: GlobalView, dip: int, nodes) -> RtGraph:
    """Arcs from each node with a valid route for ``dip`` to its next hop."""
    arcs = set()
    for ip in nodes:
        if ip == dip:
            continue
        entry = sigma[ip].rt.get(dip)
        if entry is not None and entry.flag == VALID:
            arcs.add((ip, entry.nhip))
    return RtGraph(dip, frozenset(arcs))


def find_cycle(graph: RtGraph) -> Optional[tuple]:
    """First directed cycle by ascending start address, or None.

    Each node has at most one outgoing arc (its next hop), so a simple
    pointer chase with done-marking suffices and is deterministic.
    """
    succ = dict(sorted(graph.arcs))
    done: set = set()
    for start in sorted(succ):
        if start in done:
            continue
        path = []
        on_path: dict = {}
        node = start
        while node in succ and node not in done:
            if node in on_path:
                cycle = path[on_path[node]:] + [node]
                return tuple(cycle)
            on_path[node] = len(path)
            path.append(node)
            node = succ[node]
        done.update(path)
    return None


def _all_dests(sigma: GlobalView, nodes) -> tuple:
    dips = set(nodes)
    for ip in nodes:
        dips.update(sigma[ip].rt)
    return tuple(sorted(dips))


def loop_free(sigma: GlobalView, nodes) -> Verdict:
    """Acyclicity of every per-destination routing graph."""
    for dip in _all_dests(sigma, nodes):
        cycle = find_cycle(rt_graph(sigma, dip, nodes))
        if cycle is not None:
            return Verdict(False, "loop-freedom", (dip,) + cycle)
    return Verdict(True, "loop-freedom")


# ---------------------------------------------------------------------------
# state suites

# Routing-table suites are memoized on the tuple of per-node table
# digests: most transitions shuffle queues or scratch variables without
# touching any routing table, so the vast majority of states share their
# verdict with an already-checked sibling.
_MISSING = object()
_MEMO_CAP = 1 << 20
_rt_verdicts: dict = {}


def _rt_sig(state) -> tuple:
    try:
        return state._rtsig
    except AttributeError:
        pass
    sig = tuple((ip, bdigest(d.rt)) for ip, d in net_data(state).items())
    try:
        object.__setattr__(state, "_rtsig", sig)
    except (AttributeError, TypeError):
        pass
    return sig


def _rt_cached(tag: str, raw):
    def check(state, table):
        sig = (tag,) + _rt_sig(state)
        w = _rt_verdicts.get(sig, _MISSING)
        if w is _MISSING:
            w = raw(state, table)
            if len(_rt_verdicts) < _MEMO_CAP:
                _rt_verdicts[sig] = w
        return w

    check.__name__ = raw.__name__
    return check


def _check_hop_positivity(state, table):
    for ip, d in sorted(net_data(state).items()):
        for dip in sorted(d.rt):
            if d.rt[dip].hops < 1:
                return (ip, dip, d.rt[dip].hops)
    return None


def _check_quality(state, table):
    sigma = GlobalView(net_data(state))
    for ip in sigma.addresses():
        rt = sigma[ip].rt
        for dip in sorted(valid_dests(rt)):
            nhip = next_hop(rt, dip)
            if nhip == dip:
                continue
            nrt = sigma[nhip].rt
            if dip not in valid_dests(nrt):
                continue
            if not strictly_fresher(rt, nrt, dip):
                return (ip, dip, nhip,
                        net_seqno(rt, dip), net_seqno(nrt, dip),
                        rt[dip].hops, nrt[dip].hops)
    return None


def _check_loop_freedom(state, table):
    sigma = GlobalView(net_data(state))
    verdict = loop_free(sigma, sigma.addresses())
    return None if verdict.holds else verdict.witness


def dispatch_locations(table: ProcessTable) -> frozenset:
    """Control locations right after the main loop has taken a message."""
    cached = getattr(table, "_dispatch_locs", None)
    if cached is not None:
        return cached
    stack = [table["aodv"]]
    while stack:
        t = stack.pop()
        if isinstance(t, Choice):
            stack += [t.left, t.right]
        elif isinstance(t, Receive):
            locs = table.labels(t.cont)
            table._dispatch_locs = locs
            return locs
    raise SuiteError("main loop has no receive branch")


def _check_dispatch_msg(state, table):
    locs = dispatch_locations(table)
    memo = table.__dict__.setdefault("_dispatch_memo", {})
    for ip, node in sorted(node_states(state).items()):
        proc = proc_state(node)
        key = bdigest(proc)
        lbl = memo.get(key, _MISSING)
        if lbl is _MISSING:
            here = table.labels(proc.term)
            lbl = None
            if (here & locs) and proc.data.msg is None:
                lbl = min(str(l) for l in here & locs)
            if len(memo) < _MEMO_CAP:
                memo[key] = lbl
        if lbl is not None:
            return (ip, lbl)
    return None


# ---------------------------------------------------------------------------
# step suites; each sees (state, rich_step, successor state)


def _changed_data(state, target, out):
    """(ip, before, after) for nodes whose data record was replaced.

    Walks both trees in lockstep and prunes shared subtrees, so the
    cost is the length of the changed spine, not the network size.
    """
    if state is target:
        return
    if isinstance(state, SubnetS):
        _changed_data(state.left, target.left, out)
        _changed_data(state.right, target.right, out)
        return
    b, a = proc_state(state).data, proc_state(target).data
    if a is not b:
        out.append((state.ip, b, a))


def _changed_pairs(state, rich, target) -> list:
    try:
        return rich._chg
    except AttributeError:
        pass
    out: list = []
    _changed_data(state, target, out)
    out.sort(key=lambda item: item[0])
    try:
        object.__setattr__(rich, "_chg", out)
    except (AttributeError, TypeError):
        pass
    return out


def _check_sn_monotone(state, rich, target):
    for ip, b, a in _changed_pairs(state, rich, target):
        if a.sn < b.sn:
            return (ip, b.sn, a.sn)
    return None


def _check_nsqn_monotone(state, rich, target):
    for ip, b, a in _changed_pairs(state, rich, target):
        rt0, rt1 = b.rt, a.rt
        if rt1 is rt0:
            continue
        for dip in sorted(known_dests(rt0) & known_dests(rt1)):
            if net_seqno(rt1, dip) < net_seqno(rt0, dip):
                return (ip, dip, net_seqno(rt0, dip), net_seqno(rt1, dip))
    return None


def _check_rerr_grounded(state, rich, target):
    a = rich.detail
    if isinstance(a, CastA) and isinstance(a.msg, Rerr):
        if a.dests and not a.msg.dests:
            return (rich.origin, tuple(sorted(a.dests)))
    return None


STATE_SUITES = {
    "hop-positivity": _rt_cached("hop", _check_hop_positivity),
    "quality": _rt_cached("qual", _check_quality),
    "loop-freedom": _rt_cached("loop", _check_loop_freedom),
    "dispatch-msg": _check_dispatch_msg,
}

STEP_SUITES = {
    "sn-monotone": _check_sn_monotone,
    "nsqn-monotone": _check_nsqn_monotone,
    "rerr-grounded": _check_rerr_grounded,
}

ALL_SUITES = tuple(STATE_SUITES) + tuple(STEP_SUITES)


def split_suites(names=None) -> tuple:
    """Partition requested suite names into (state, step) name tuples."""
    if names is None:
        return tuple(STATE_SUITES), tuple(STEP_SUITES)
    state, step = [], []
    for name in names:
        if name in STATE_SUITES:
            state.append(name)
        elif name in STEP_SUITES:
            step.append(name)
        else:
            raise SuiteError(f"unknown suite {name!r} "
                             f"(known: {', '.join(ALL_SUITES)})")
    return tuple(state), tuple(step)


def state_checks(table: ProcessTable, names=None):
    """Ordered (name, state -> witness|None) pairs for the given suites."""
    picked = split_suites(names)[0]
    return [(n, (lambda s, f=STATE_SUITES[n]: f(s, table))) for n in picked]


def step_checks(table: ProcessTable, names=None):
    picked = split_suites(names)[1]
    return [(n, STEP_SUITES[n]) for n in picked]


def check_state_invariants(state, table: ProcessTable, names=None) -> Verdict:
    """First failing state suite, or a passing verdict."""
    for name, fn in state_checks(table, names):
        witness = fn(state)
        if witness is not None:
            return Verdict(False, name, witness)
    return Verdict(True)


def check_step_invariants(step_triple, table: ProcessTable,
                          names=None) -> Verdict:
    state, rich, target = step_triple
    for name, fn in step_checks(table, names):
        witness = fn(state, rich, target)
        if witness is not None:
            return Verdict(False, name, witness)
    return Verdict(True)

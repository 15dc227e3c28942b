"""Bounded explicit-state exploration of closed networks.

The environment is finitized by an :class:`EnvMenu`: a budget of
new-packet injections per (node, data, destination) triple and an
ordered script of topology events.  ``EnvNet`` pairs a closed network
automaton with that menu so exploration is over completely closed
systems.

``explore`` is a deterministic breadth-first search: initial states and
successor sets are sorted by canonical key, so reports and
counterexamples are reproducible byte for byte, independent of hash
seeds and thread count.  To keep millions of states affordable, the
search retains only canonical keys plus a parent pointer and a branch
rank per state; counterexample paths are rebuilt afterwards by
replaying those ranks from the initial state.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .awn import (ConnectA, DisconnectA, ModelError, NetMenu, RichStep,
                  NewpktA)
from .canon import (EMPTY_MAP, FrozenMap, bdigest, digest, struct_digest,
                    value_key)
from .messages import Newpkt
from .monitor import state_checks, step_checks
from .network import NetTree, closed_net
from .protocol import BASE, VariantConfig, build_table
from .trace import render_action

EMPTY = frozenset()
DEFAULT_STATE_CAP = 10_000_000


class ResourceCapError(Exception):
    """The state cap was hit; carries the partial report."""

    def __init__(self, report):
        super().__init__(f"state cap exceeded after {report.states} states")
        self.report = report


@dataclass(frozen=True)
class EnvMenu:
    newpkts: FrozenMap = EMPTY_MAP   # (ip, data, dip) -> injection budget
    links: tuple = ()                # Connect/Disconnect actions, in order

    def canon_key(self) -> tuple:
        return ("envmenu", self.newpkts.canon_key(),
                tuple(value_key(a) for a in self.links))


def env_menu(newpkts=(), links=()) -> EnvMenu:
    """Build an EnvMenu from (ip, data, dip, count) rows and link events."""
    budget = {}
    for ip, data, dip, count in newpkts:
        key = (ip, data, dip)
        budget[key] = budget.get(key, 0) + count
    script = []
    for ev in links:
        if isinstance(ev, (ConnectA, DisconnectA)):
            script.append(ev)
        else:
            op, a, b = ev
            if op == "connect":
                script.append(ConnectA(a, b))
            elif op == "disconnect":
                script.append(DisconnectA(a, b))
            else:
                raise ModelError(f"unknown link event {op!r}")
    return EnvMenu(FrozenMap({k: v for k, v in budget.items() if v > 0}),
                   tuple(script))


@dataclass(frozen=True)
class EnvState:
    remaining: FrozenMap  # (ip, data, dip) -> budget left (positive only)
    pos: int              # index of the next link event

    def canon_key(self) -> tuple:
        return ("envst", self.remaining.canon_key(), self.pos)

    def canon_digest(self) -> bytes:
        b = self.__dict__.get("_bdg")
        if b is None:
            b = struct_digest(b"E", (self.remaining, self.pos))
            object.__setattr__(self, "_bdg", b)
        return b


class EnvNet:
    """A closed network paired with its finite environment."""

    def __init__(self, net, env: EnvMenu):
        self.net = net
        self.env = env
        env0 = EnvState(env.newpkts, 0)
        self.init = frozenset((s, env0) for s in net.init)
        self._menus = {}

    def menu_for(self, env_state: EnvState) -> NetMenu:
        menu = self._menus.get(env_state)
        if menu is not None:
            return menu
        per_ip: dict = {}
        for (ip, data, dip) in env_state.remaining:
            per_ip.setdefault(ip, set()).add(Newpkt(data, dip))
        if env_state.pos < len(self.env.links):
            links = frozenset([self.env.links[env_state.pos]])
        else:
            links = EMPTY
        menu = NetMenu(EMPTY,
                       FrozenMap({ip: frozenset(v)
                                  for ip, v in per_ip.items()}),
                       links)
        self._menus[env_state] = menu
        return menu

    def rich_steps(self, state) -> tuple:
        net_s, env_s = state
        out = []
        for r in self.net.rich_steps(net_s, self.menu_for(env_s)):
            if isinstance(r.action, NewpktA):
                key = (r.action.ip, r.action.data, r.action.dip)
                left = env_s.remaining[key]
                rem = (env_s.remaining.remove(key) if left == 1
                       else env_s.remaining.set(key, left - 1))
                env2 = EnvState(rem, env_s.pos)
            elif isinstance(r.action, (ConnectA, DisconnectA)):
                env2 = EnvState(env_s.remaining, env_s.pos + 1)
            else:
                env2 = env_s
            out.append(RichStep(r.origin, r.detail, r.action,
                                (r.target, env2)))
        return tuple(out)

    def steps(self, state) -> frozenset:
        return frozenset((r.action, r.target) for r in self.rich_steps(state))


@dataclass(frozen=True)
class TraceStep:
    origin: Optional[int]
    action: str   # rendered, for people
    key: tuple    # full canonical step key, for replay
    digest: str   # digest of the state reached


@dataclass(frozen=True)
class Counterexample:
    suite: str
    kind: str        # "state" or "step"
    witness: tuple
    init_key: bytes  # digest of the initial state
    steps: tuple     # TraceStep path from the initial state
    digest: str      # digest of the violating (target) state

    @property
    def depth(self) -> int:
        return len(self.steps)


@dataclass
class ExplorationReport:
    states: int = 0
    transitions: int = 0
    depth: int = 0
    complete: bool = False
    capped: bool = False
    suites: tuple = ()
    counterexamples: tuple = ()
    state_index: dict = field(default_factory=dict, repr=False)

    @property
    def holds(self) -> bool:
        return not self.counterexamples


def _step_key(r: RichStep) -> tuple:
    """Cheap deterministic ordering key for sibling transitions.

    Covers all four step components, so distinct steps never tie.  The
    digests are cached on the underlying objects, which the memoized
    node layer shares across expansions, so this never rebuilds a full
    canonical key.
    """
    return (
        -1 if r.origin is None else r.origin,
        bdigest(r.detail),
        bdigest(r.action),
        bdigest(r.target),
    )


def _sorted_steps(auto, state) -> list:
    return sorted(auto.rich_steps(state), key=_step_key)


def _rank_path(visited, key) -> tuple:
    """Parent chain of (init_key, branch ranks leading to key)."""
    ranks = []
    while True:
        parent, rank = visited[key]
        if parent is None:
            ranks.reverse()
            return key, ranks
        ranks.append(rank)
        key = parent


def _skey(state) -> bytes:
    return bdigest(state)


def _rebuild(auto, inits, visited, anchor_key, extra_rank=None):
    """Replay the stored ranks to recover a concrete trace."""
    init_key, ranks = _rank_path(visited, anchor_key)
    if extra_rank is not None:
        ranks.append(extra_rank)
    state = inits[init_key]
    steps = []
    for rank in ranks:
        r = _sorted_steps(auto, state)[rank]
        state = r.target
        steps.append(TraceStep(r.origin, render_action(r.detail),
                               r.canon_key(), digest(value_key(state))))
    return init_key, tuple(steps), state


def explore(auto, *, allow=None, bound=None, state_cap=DEFAULT_STATE_CAP,
            state_suites=(), step_suites=(), stop_on_violation=True,
            threads=1, keep_states=False) -> ExplorationReport:
    """Breadth-first reachability with invariant checking.

    ``allow`` filters transitions by their action.  ``bound`` limits the
    number of expansion layers (states deeper than it are not created).
    ``state_suites``/``step_suites`` are (name, check) pairs where a
    check returns a witness tuple or None.  Raises ResourceCapError when
    more than ``state_cap`` states would be stored.
    """
    suites = tuple(n for n, _ in state_suites) + tuple(n for n, _ in step_suites)
    report = ExplorationReport(suites=suites)
    visited: dict = {}            # digest -> (parent digest | None, branch rank)
    index = report.state_index    # digest -> state, only when keep_states
    pending: list = []            # (suite, kind, witness, anchor key, extra)
    inits: dict = {}

    frontier = []
    for s in sorted(auto.init, key=value_key):
        k = _skey(s)
        if k in visited:
            continue
        visited[k] = (None, None)
        inits[k] = s
        if keep_states:
            index[k] = s
        frontier.append((s, k))
        for name, check in state_suites:
            w = check(s)
            if w is not None:
                pending.append((name, "state", tuple(w), k, None))

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    expand = lambda item: _sorted_steps(auto, item[0])
    try:
        while frontier:
            if pending and stop_on_violation:
                break
            if bound is not None and report.depth >= bound:
                break
            layers = pool.map(expand, frontier) if pool else map(expand, frontier)
            next_frontier = []
            for (state, key), steps in zip(frontier, layers):
                for rank, r in enumerate(steps):
                    if allow is not None and not allow(r.action):
                        continue
                    report.transitions += 1
                    tkey = _skey(r.target)
                    is_new = tkey not in visited
                    if is_new:
                        if len(visited) >= state_cap:
                            report.states = len(visited)
                            report.capped = True
                            report.counterexamples = _finish(
                                auto, inits, visited, pending)
                            raise ResourceCapError(report)
                        visited[tkey] = (key, rank)
                        if keep_states:
                            index[tkey] = r.target
                        next_frontier.append((r.target, tkey))
                    for name, check in step_suites:
                        w = check(state, r, r.target)
                        if w is not None:
                            pending.append((name, "step", tuple(w), key, rank))
                    if is_new:
                        for name, check in state_suites:
                            w = check(r.target)
                            if w is not None:
                                pending.append(
                                    (name, "state", tuple(w), tkey, None))
            if next_frontier:
                report.depth += 1
            frontier = next_frontier
        else:
            report.complete = True
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)

    report.states = len(visited)
    report.counterexamples = _finish(auto, inits, visited, pending)
    return report


def _finish(auto, inits, visited, pending) -> tuple:
    out = []
    for suite, kind, witness, anchor, extra in pending:
        init_key, steps, state = _rebuild(auto, inits, visited, anchor, extra)
        out.append(Counterexample(suite, kind, witness, init_key, steps,
                                  digest(value_key(state))))
    return tuple(out)


def reachable(auto, allow=None, bound=None,
              state_cap=DEFAULT_STATE_CAP) -> frozenset:
    """All states reachable through allowed actions, within the bound."""
    report = explore(auto, allow=allow, bound=bound, state_cap=state_cap,
                     keep_states=True)
    return frozenset(report.state_index.values())


def invariant(auto, pred, allow=None, bound=None,
              state_cap=DEFAULT_STATE_CAP, threads=1) -> ExplorationReport:
    """Does ``pred`` hold on every reachable state?"""
    check = lambda s: None if pred(s) else ("predicate false",)
    return explore(auto, allow=allow, bound=bound, state_cap=state_cap,
                   state_suites=[("invariant", check)], threads=threads)


def step_invariant(auto, pred, allow=None, bound=None,
                   state_cap=DEFAULT_STATE_CAP, threads=1) -> ExplorationReport:
    """Does ``pred(state, action, successor)`` hold on every transition?"""
    check = (lambda s, r, t:
             None if pred(s, r.action, t) else ("predicate false",))
    return explore(auto, allow=allow, bound=bound, state_cap=state_cap,
                   step_suites=[("step-invariant", check)], threads=threads)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("AWN_AODV_THREADS", "1")))
    except ValueError:
        return 1


def check_theorem1(tree: NetTree, env: EnvMenu, cfg: VariantConfig = BASE,
                   suites=None, bound=None, state_cap=DEFAULT_STATE_CAP,
                   stop_on_violation=True, threads=None,
                   table=None) -> ExplorationReport:
    """Explore a closed network under ``env`` and check the full suite.

    The explored states carry the environment alongside the network;
    the monitor checks see only the network part.
    """
    if table is None:
        table = build_table(cfg)
    auto = EnvNet(closed_net(tree, cfg, table), env)
    sc = [(n, (lambda s, f=f: f(s[0]))) for n, f in state_checks(table, suites)]
    tc = [(n, (lambda s, r, t, f=f: f(s[0], r, t[0])))
          for n, f in step_checks(table, suites)]
    return explore(auto, state_suites=sc, step_suites=tc,
                   bound=bound, state_cap=state_cap,
                   stop_on_violation=stop_on_violation,
                   threads=default_threads() if threads is None else threads)


def replay(auto, cx: Counterexample):
    """Re-run a counterexample's action path; returns the violating state."""
    start = None
    for s in auto.init:
        if _skey(s) == cx.init_key:
            start = s
            break
    if start is None:
        raise ModelError("counterexample initial state not in automaton")
    state = start
    for i, step in enumerate(cx.steps):
        for r in auto.rich_steps(state):
            if r.canon_key() == step.key:
                state = r.target
                break
        else:
            raise ModelError(f"counterexample does not replay at step {i}")
    return state

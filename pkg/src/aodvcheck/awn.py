"""Process-calculus core: terms, labels, actions and step semantics.

The model is layered the way wireless protocol algebras usually are:

  1. sequential process terms operating on a local data state,
  2. a local parallel composition (protocol process beside a message
     queue) where the left component's receives synchronize with the
     right component's sends,
  3. a network node wrapping one such pair with an address and a set of
     reachable neighbours,
  4. parallel composition of node subnets, where a cast by one side is
     delivered synchronously to every in-range node of the other side,
  5. a closed network, which internalizes casts and forbids stray
     arrivals.

States at every layer are immutable values; each ``steps`` function is a
pure map from a state (plus a finite environment menu) to a finite set
of (action, successor) pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional

from .canon import (EMPTY_MAP, FrozenMap, bdigest, cached_key, struct_digest,
                    value_key)

EMPTY = frozenset()


class ModelError(Exception):
    """Raised for ill-formed process tables, terms or network trees."""


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class Label:
    """A control location: process name plus offset within its body."""

    pname: str
    offset: int

    def __str__(self) -> str:
        return f"{self.pname}-:{self.offset}"

    def canon_key(self) -> tuple:
        return ("lbl", self.pname, self.offset)


# ---------------------------------------------------------------------------
# process terms
#
# Terms compare by identity: each process body is built (and labelled)
# exactly once, so two equal-looking terms are the same object.  Guard
# tests return a finite iterable of successor data states; assignments
# and message builders are plain functions of the data state.


@dataclass(eq=False, frozen=True)
class Assign:
    update: Callable[[Any], Any]
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Guard:
    test: Callable[[Any], Iterable[Any]]
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Broadcast:
    msg: Callable[[Any], Any]
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Groupcast:
    dests: Callable[[Any], frozenset]
    msg: Callable[[Any], Any]
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Unicast:
    dest: Callable[[Any], int]
    msg: Callable[[Any], Any]
    ok: Optional["ProcessTerm"] = None
    fail: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Send:
    msg: Callable[[Any], Any]
    cont: Optional["ProcessTerm"] = None
    update: Optional[Callable[[Any], Any]] = None  # applied when the send fires
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Receive:
    update: Callable[[Any, Any], Any]  # (message, data) -> data
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Deliver:
    data: Callable[[Any], Any]
    cont: Optional["ProcessTerm"] = None
    label: Optional[Label] = None


@dataclass(eq=False, frozen=True)
class Choice:
    left: "ProcessTerm"
    right: "ProcessTerm"


@dataclass(eq=False, frozen=True)
class Call:
    name: str


ProcessTerm = (
    Assign | Guard | Broadcast | Groupcast | Unicast | Send | Receive
    | Deliver | Choice | Call
)

_PREFIXES = (Assign, Guard, Broadcast, Groupcast, Unicast, Send, Receive, Deliver)


def choice(*terms: ProcessTerm) -> ProcessTerm:
    """Right-associated n-ary choice."""
    if not terms:
        raise ModelError("choice needs at least one branch")
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = Choice(t, out)
    return out


def seq(*parts: ProcessTerm) -> ProcessTerm:
    """Chain prefixes into a sequence ending in the last part.

    All parts but the last must have an unset continuation; builders
    create prefixes bare and let this fill them in.
    """
    *prefixes, tail = parts
    out = tail
    for p in reversed(prefixes):
        if isinstance(p, (Choice, Call, Unicast)) or p.cont is not None:
            raise ModelError(f"cannot chain through {type(p).__name__}")
        out = replace(p, cont=out)
    return out


def _check_complete(pname: str, body: ProcessTerm) -> None:
    stack = [body]
    while stack:
        t = stack.pop()
        if isinstance(t, Call):
            continue
        if isinstance(t, Choice):
            stack += [t.left, t.right]
        elif isinstance(t, Unicast):
            if t.ok is None or t.fail is None:
                raise ModelError(f"{pname}: unicast without both branches")
            stack += [t.ok, t.fail]
        else:
            if t.cont is None:
                raise ModelError(
                    f"{pname}: {type(t).__name__} prefix without continuation"
                )
            stack.append(t.cont)


def label_process(pname: str, body: ProcessTerm) -> ProcessTerm:
    """Assign control-location labels to every prefix of ``body``.

    Labels number the control states of the process, in left-to-right
    traversal order.  All branches of a choice start at the same
    location, so their head prefixes share one label; every
    continuation gets a fresh offset.  Calls carry no label.  Offsets
    are contiguous from 0.
    """
    _check_complete(pname, body)

    def walk(t: ProcessTerm, entry: int, fresh: int):
        # returns (labelled term, next fresh offset, consumed entry?)
        if isinstance(t, Call):
            return t, fresh, False
        if isinstance(t, Choice):
            left, fresh, c1 = walk(t.left, entry, fresh)
            right, fresh, c2 = walk(t.right, entry, fresh)
            return Choice(left, right), fresh, c1 or c2
        lbl = Label(pname, entry)
        if isinstance(t, Unicast):
            cur = fresh
            ok, f2, used = walk(t.ok, cur, cur + 1)
            cur = f2 if used else cur
            fail, f3, used = walk(t.fail, cur, cur + 1)
            cur = f3 if used else cur
            return replace(t, ok=ok, fail=fail, label=lbl), cur, True
        cont, f2, used = walk(t.cont, fresh, fresh + 1)
        return replace(t, cont=cont, label=lbl), f2 if used else fresh, True

    out, _, _ = walk(body, 0, 1)
    return out


class ProcessTable:
    """Named process bodies; the recursion environment for Call."""

    def __init__(self, bodies: dict[str, ProcessTerm]):
        self._bodies = dict(bodies)
        self._label_cache: dict[int, tuple] = {}
        for name, body in self._bodies.items():
            _check_complete(name, body)
            for target in _call_targets(body):
                if target not in self._bodies:
                    raise ModelError(
                        f"process {name!r} calls undeclared process {target!r}"
                    )

    def __getitem__(self, name: str) -> ProcessTerm:
        try:
            return self._bodies[name]
        except KeyError:
            raise ModelError(f"undeclared process {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._bodies

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._bodies))

    def labels(self, term: ProcessTerm, _active: frozenset = EMPTY) -> frozenset:
        """Current control location(s) of ``term``.

        Prefixes contribute their head label, a choice the union of its
        branches, a call the entry location(s) of the callee.  Recursive
        calls that are still being resolved contribute nothing, which
        yields the least fixpoint.
        """
        key = id(term)
        if not _active and key in self._label_cache:
            return self._label_cache[key][1]
        if isinstance(term, Choice):
            out = self.labels(term.left, _active) | self.labels(term.right, _active)
        elif isinstance(term, Call):
            if term.name in _active:
                out = EMPTY
            else:
                out = self.labels(self[term.name], _active | {term.name})
        else:
            if term.label is None:
                raise ModelError("term has no label; run label_process first")
            out = frozenset([term.label])
        if not _active:
            self._label_cache[key] = (term, out)
        return out

    def all_labels(self) -> frozenset:
        """Every label occurring anywhere in the table."""
        out: set[Label] = set()
        for body in self._bodies.values():
            stack = [body]
            while stack:
                t = stack.pop()
                if isinstance(t, Choice):
                    stack += [t.left, t.right]
                elif isinstance(t, Call):
                    continue
                else:
                    if t.label is not None:
                        out.add(t.label)
                    if isinstance(t, Unicast):
                        stack += [t.ok, t.fail]
                    else:
                        stack.append(t.cont)
        return frozenset(out)


def _call_targets(body: ProcessTerm) -> set[str]:
    out: set[str] = set()
    stack = [body]
    while stack:
        t = stack.pop()
        if isinstance(t, Call):
            out.add(t.name)
        elif isinstance(t, Choice):
            stack += [t.left, t.right]
        elif isinstance(t, Unicast):
            stack += [t.ok, t.fail]
        else:
            stack.append(t.cont)
    return out


def on_labels(table: ProcessTable, pred) -> Callable[["ProcState"], bool]:
    """Lift a predicate over (data, label) to process states.

    The lifted predicate holds iff ``pred`` holds at every current
    control location of the state's term.
    """

    def check(state: "ProcState") -> bool:
        return all(pred(state.data, lbl) for lbl in table.labels(state.term))

    return check


# ---------------------------------------------------------------------------
# actions


@dataclass(frozen=True)
class TauA:
    def canon_key(self) -> tuple:
        return ("a.tau",)

    def __repr__(self) -> str:
        return "Tau"


TAU = TauA()


@dataclass(frozen=True)
class BroadcastA:
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.bcast", value_key(self.msg))


@dataclass(frozen=True)
class GroupcastA:
    dests: frozenset
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.gcast", value_key(self.dests), value_key(self.msg))


@dataclass(frozen=True)
class UnicastA:
    dest: int
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.ucast", self.dest, value_key(self.msg))


@dataclass(frozen=True)
class UnicastFailA:
    dest: int

    def canon_key(self) -> tuple:
        return ("a.ucast_fail", self.dest)


@dataclass(frozen=True)
class SendA:
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.send", value_key(self.msg))


@dataclass(frozen=True)
class ReceiveA:
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.recv", value_key(self.msg))


@dataclass(frozen=True)
class DeliverA:
    data: Any

    def canon_key(self) -> tuple:
        return ("a.deliver", value_key(self.data))


@dataclass(frozen=True)
class CastA:
    dests: frozenset
    msg: Any

    def canon_key(self) -> tuple:
        return ("a.cast", value_key(self.dests), value_key(self.msg))


@dataclass(frozen=True)
class ArriveA:
    heard: frozenset
    missed: frozenset
    msg: Any

    def __post_init__(self):
        if self.heard & self.missed:
            raise ModelError("arrive: hearing and missing sets overlap")

    def canon_key(self) -> tuple:
        return (
            "a.arrive",
            value_key(self.heard),
            value_key(self.missed),
            value_key(self.msg),
        )


@dataclass(frozen=True)
class ConnectA:
    a: int
    b: int

    def canon_key(self) -> tuple:
        return ("a.connect", self.a, self.b)


@dataclass(frozen=True)
class DisconnectA:
    a: int
    b: int

    def canon_key(self) -> tuple:
        return ("a.disconnect", self.a, self.b)


@dataclass(frozen=True)
class NewpktA:
    ip: int
    data: Any
    dip: int

    def canon_key(self) -> tuple:
        return ("a.newpkt", self.ip, value_key(self.data), self.dip)


@dataclass(frozen=True)
class DeliverAtA:
    ip: int
    data: Any

    def canon_key(self) -> tuple:
        return ("a.deliver_at", self.ip, value_key(self.data))


Action = (
    TauA | BroadcastA | GroupcastA | UnicastA | UnicastFailA | SendA | ReceiveA
    | DeliverA | CastA | ArriveA | ConnectA | DisconnectA | NewpktA | DeliverAtA
)


# ---------------------------------------------------------------------------
# layer 1: sequential processes


@dataclass(frozen=True)
class ProcState:
    """A sequential process state: data valuation plus control term."""

    data: Any
    term: ProcessTerm
    table: "ProcessTable" = field(compare=False, repr=False, default=None)

    def canon_key(self) -> tuple:
        def build():
            locs = tuple(
                sorted((l.pname, l.offset) for l in self.table.labels(self.term))
            )
            return ("proc", value_key(self.data), locs)

        return cached_key(self, build)

    def canon_digest(self) -> bytes:
        b = self.__dict__.get("_bdg")
        if b is None:
            locs = tuple(
                sorted((l.pname, l.offset) for l in self.table.labels(self.term))
            )
            b = struct_digest(b"P", (self.data, locs))
            object.__setattr__(self, "_bdg", b)
        return b


def seq_steps(
    table: ProcessTable, state: ProcState, menu: frozenset = EMPTY
) -> frozenset:
    """One-step successors of a sequential process state.

    ``menu`` is the finite set of messages offered for Receive; the
    composition layers narrow it to whatever the context can actually
    send.  Calls unfold transparently (they consume no step).
    """
    out: set = set()
    _seq_into(table, state.data, state.term, menu, out, ())
    return frozenset(out)


def _seq_into(table, xi, term, menu, out, unfolding):
    if isinstance(term, Assign):
        out.add((TAU, ProcState(term.update(xi), term.cont, table)))
    elif isinstance(term, Guard):
        for xi2 in term.test(xi):
            out.add((TAU, ProcState(xi2, term.cont, table)))
    elif isinstance(term, Broadcast):
        out.add((BroadcastA(term.msg(xi)), ProcState(xi, term.cont, table)))
    elif isinstance(term, Groupcast):
        out.add((GroupcastA(frozenset(term.dests(xi)), term.msg(xi)),
                 ProcState(xi, term.cont, table)))
    elif isinstance(term, Unicast):
        dest = term.dest(xi)
        out.add((UnicastA(dest, term.msg(xi)), ProcState(xi, term.ok, table)))
        out.add((UnicastFailA(dest), ProcState(xi, term.fail, table)))
    elif isinstance(term, Send):
        xi2 = xi if term.update is None else term.update(xi)
        out.add((SendA(term.msg(xi)), ProcState(xi2, term.cont, table)))
    elif isinstance(term, Receive):
        for m in menu:
            out.add((ReceiveA(m), ProcState(term.update(m, xi), term.cont, table)))
    elif isinstance(term, Deliver):
        out.add((DeliverA(term.data(xi)), ProcState(xi, term.cont, table)))
    elif isinstance(term, Choice):
        _seq_into(table, xi, term.left, menu, out, unfolding)
        _seq_into(table, xi, term.right, menu, out, unfolding)
    elif isinstance(term, Call):
        if term.name in unfolding:
            raise ModelError(f"unguarded recursion through {term.name!r}")
        _seq_into(table, xi, table[term.name], menu, out, unfolding + (term.name,))
    else:  # pragma: no cover
        raise ModelError(f"unknown term {term!r}")


class Automaton:
    """A state machine with a finite, menu-driven step function."""

    init: frozenset

    def steps(self, state, menu=EMPTY) -> frozenset:
        raise NotImplementedError


class SeqAutomaton(Automaton):
    def __init__(self, table: ProcessTable, init: frozenset):
        self.table = table
        self.init = init

    def steps(self, state, menu=EMPTY) -> frozenset:
        return seq_steps(self.table, state, menu)


# ---------------------------------------------------------------------------
# layer 2: protocol process beside its message queue


class ParAutomaton(Automaton):
    """Left component's receives feed on right component's sends.

    A Receive(m) of the left and a Send(m) of the right synchronize to
    an internal step.  Every other action of the left except Receive,
    and of the right except Send, interleaves.
    """

    def __init__(self, left: Automaton, right: Automaton):
        self.left = left
        self.right = right
        self.init = frozenset((l, r) for l in left.init for r in right.init)

    def steps(self, state, menu=EMPTY) -> frozenset:
        l, r = state
        right_steps = self.right.steps(r, menu)
        sendable = frozenset(
            a.msg for a, _ in right_steps if isinstance(a, SendA)
        )
        left_steps = self.left.steps(l, sendable)
        out = set()
        for a, l2 in left_steps:
            if isinstance(a, ReceiveA):
                for b, r2 in right_steps:
                    if isinstance(b, SendA) and b.msg == a.msg:
                        out.add((TAU, (l2, r2)))
            else:
                out.add((a, (l2, r)))
        for b, r2 in right_steps:
            if not isinstance(b, SendA):
                out.add((b, (l, r2)))
        return frozenset(out)


def parallel(left: Automaton, right: Automaton) -> ParAutomaton:
    return ParAutomaton(left, right)


# ---------------------------------------------------------------------------
# network layers
#
# The environment menu for the network layers bundles three finite
# supplies: messages that may arrive from surrounding casts, new-packet
# injections allowed per node, and topology events under consideration.


@dataclass(frozen=True)
class NetMenu:
    messages: frozenset = EMPTY
    newpkts: FrozenMap = EMPTY_MAP  # ip -> frozenset of new-packet messages
    links: frozenset = EMPTY        # ConnectA / DisconnectA actions

    def canon_key(self) -> tuple:
        return (
            "menu",
            value_key(self.messages),
            self.newpkts.canon_key(),
            value_key(self.links),
        )


EMPTY_MENU = NetMenu()


@dataclass(frozen=True)
class NodeS:
    ip: int
    inner: Any
    nbrs: frozenset

    def canon_key(self) -> tuple:
        def build():
            return ("node", self.ip, value_key(self.inner),
                    tuple(sorted(self.nbrs)))

        return cached_key(self, build)

    def canon_digest(self) -> bytes:
        b = self.__dict__.get("_bdg")
        if b is None:
            b = struct_digest(b"N", (self.ip, self.inner, self.nbrs))
            object.__setattr__(self, "_bdg", b)
        return b


@dataclass(frozen=True)
class SubnetS:
    left: Any
    right: Any

    def canon_key(self) -> tuple:
        def build():
            return ("sub", value_key(self.left), value_key(self.right))

        return cached_key(self, build)

    def canon_digest(self) -> bytes:
        b = self.__dict__.get("_bdg")
        if b is None:
            b = struct_digest(b"S", (self.left, self.right))
            object.__setattr__(self, "_bdg", b)
        return b


@dataclass(frozen=True)
class RichStep:
    """A network transition with provenance for traces and drivers.

    ``action`` is the action visible at this layer; ``detail`` keeps the
    informative shape (for instance the Cast that a closed network
    reports as Tau) and ``origin`` the address of the acting node, when
    there is one.
    """

    origin: Optional[int]
    detail: Action
    action: Action
    target: Any

    def canon_key(self) -> tuple:
        return (
            "step",
            -1 if self.origin is None else self.origin,
            value_key(self.detail),
            value_key(self.action),
            value_key(self.target),
        )


class NetAutomaton(Automaton):
    """Shared shape of node, subnet and closed automata."""

    addresses: frozenset

    def rich_steps(self, state, menu: NetMenu = EMPTY_MENU) -> tuple:
        raise NotImplementedError

    def steps(self, state, menu: NetMenu = EMPTY_MENU) -> frozenset:
        return frozenset((r.action, r.target) for r in self.rich_steps(state, menu))

    def cast_delivery(self, state, msg, dests: frozenset) -> frozenset:
        """States after ``msg`` is cast with range ``dests``.

        Every in-range node must take the message (empty result means
        the cast is blocked); out-of-range nodes are untouched.
        """
        raise NotImplementedError


def _is_newpkt(msg: Any) -> bool:
    return getattr(msg, "is_newpkt", False)


# Node step sets are memoized: a node's local state repeats across a huge
# number of global states, and recomputing its successors means walking
# process terms and re-evaluating guards every time.  Exploration of a
# small network touches far fewer distinct (node state, menu) pairs than
# global states, so a per-automaton cache pays for itself immediately.
_MEMO_CAP = 1 << 20


class NodeAutomaton(NetAutomaton):
    def __init__(self, ip: int, inner: Automaton, nbrs: frozenset):
        if ip in nbrs:
            raise ModelError(f"node {ip} lists itself as neighbour")
        self.ip = ip
        self.inner = inner
        self.addresses = frozenset([ip])
        self.init = frozenset(NodeS(ip, i, frozenset(nbrs)) for i in inner.init)
        self._steps_memo: dict = {}
        self._cast_memo: dict = {}

    def rich_steps(self, state: NodeS, menu: NetMenu = EMPTY_MENU) -> tuple:
        mkey = (bdigest(state), menu)
        hit = self._steps_memo.get(mkey)
        if hit is not None:
            return hit
        out = self._rich_steps(state, menu)
        if len(self._steps_memo) < _MEMO_CAP:
            self._steps_memo[mkey] = out
        return out

    def _rich_steps(self, state: NodeS, menu: NetMenu) -> tuple:
        ip = state.ip
        local_new = menu.newpkts.get(ip, EMPTY)
        inner_menu = menu.messages | local_new
        out: list[RichStep] = []

        def emit(origin, detail, action, target):
            out.append(RichStep(origin, detail, action, target))

        for a, inner2 in self.inner.steps(state.inner, inner_menu):
            nxt = NodeS(ip, inner2, state.nbrs)
            if isinstance(a, BroadcastA):
                act = CastA(state.nbrs, a.msg)
                emit(ip, act, act, nxt)
            elif isinstance(a, GroupcastA):
                act = CastA(state.nbrs & a.dests, a.msg)
                emit(ip, act, act, nxt)
            elif isinstance(a, UnicastA):
                if a.dest in state.nbrs:
                    act = CastA(frozenset([a.dest]), a.msg)
                    emit(ip, act, act, nxt)
            elif isinstance(a, UnicastFailA):
                if a.dest not in state.nbrs:
                    emit(ip, a, TAU, nxt)
            elif isinstance(a, ReceiveA):
                if _is_newpkt(a.msg):
                    if a.msg in local_new:
                        act = NewpktA(ip, a.msg.data, a.msg.dip)
                        emit(ip, act, act, nxt)
                elif a.msg in menu.messages:
                    act = ArriveA(frozenset([ip]), EMPTY, a.msg)
                    emit(ip, act, act, nxt)
            elif isinstance(a, DeliverA):
                act = DeliverAtA(ip, a.data)
                emit(ip, act, act, nxt)
            elif isinstance(a, TauA):
                emit(ip, a, TAU, nxt)
            # a bare Send has no node-level rule and is dropped

        for m in menu.messages:
            act = ArriveA(EMPTY, frozenset([ip]), m)
            emit(None, act, act, state)

        for ev in menu.links:
            nbrs = state.nbrs
            if isinstance(ev, ConnectA):
                if ip == ev.a:
                    nbrs = nbrs | {ev.b}
                elif ip == ev.b:
                    nbrs = nbrs | {ev.a}
            elif isinstance(ev, DisconnectA):
                if ip == ev.a:
                    nbrs = nbrs - {ev.b}
                elif ip == ev.b:
                    nbrs = nbrs - {ev.a}
            else:
                raise ModelError(f"bad link event {ev!r}")
            emit(None, ev, ev, NodeS(ip, state.inner, nbrs))

        return tuple(out)

    def cast_delivery(self, state: NodeS, msg, dests: frozenset) -> frozenset:
        if state.ip not in dests:
            return frozenset([state])
        mkey = (bdigest(state), msg)
        hit = self._cast_memo.get(mkey)
        if hit is not None:
            return hit
        got = set()
        for a, inner2 in self.inner.steps(state.inner, frozenset([msg])):
            if isinstance(a, ReceiveA) and a.msg == msg:
                got.add(NodeS(state.ip, inner2, state.nbrs))
        out = frozenset(got)
        if len(self._cast_memo) < _MEMO_CAP:
            self._cast_memo[mkey] = out
        return out


class SubnetAutomaton(NetAutomaton):
    def __init__(self, left: NetAutomaton, right: NetAutomaton):
        if left.addresses & right.addresses:
            raise ModelError("subnets share addresses")
        self.left = left
        self.right = right
        self.addresses = left.addresses | right.addresses
        self.init = frozenset(
            SubnetS(l, r) for l in left.init for r in right.init
        )
        self._cast_memo: dict = {}

    def rich_steps(self, state: SubnetS, menu: NetMenu = EMPTY_MENU) -> tuple:
        lsteps = self.left.rich_steps(state.left, menu)
        rsteps = self.right.rich_steps(state.right, menu)
        out: list[RichStep] = []

        def one_side(steps, other_auto, other_state, put):
            for r in steps:
                if isinstance(r.action, (TauA, DeliverAtA, NewpktA)):
                    out.append(
                        RichStep(r.origin, r.detail, r.action, put(r.target, other_state))
                    )
                elif isinstance(r.action, CastA):
                    for other2 in other_auto.cast_delivery(
                        other_state, r.action.msg, r.action.dests
                    ):
                        out.append(
                            RichStep(r.origin, r.detail, r.action, put(r.target, other2))
                        )
                # Arrive and Connect/Disconnect are joined below

        one_side(lsteps, self.right, state.right, lambda mine, other: SubnetS(mine, other))
        one_side(rsteps, self.left, state.left, lambda mine, other: SubnetS(other, mine))

        for rl in lsteps:
            al = rl.action
            if isinstance(al, ArriveA):
                for rr in rsteps:
                    ar = rr.action
                    if isinstance(ar, ArriveA) and ar.msg == al.msg:
                        act = ArriveA(
                            al.heard | ar.heard, al.missed | ar.missed, al.msg
                        )
                        out.append(
                            RichStep(None, act, act, SubnetS(rl.target, rr.target))
                        )
            elif isinstance(al, (ConnectA, DisconnectA)):
                for rr in rsteps:
                    if rr.action == al:
                        out.append(
                            RichStep(None, al, al, SubnetS(rl.target, rr.target))
                        )
        return tuple(out)

    def cast_delivery(self, state: SubnetS, msg, dests: frozenset) -> frozenset:
        mkey = (bdigest(state), msg, dests)
        hit = self._cast_memo.get(mkey)
        if hit is not None:
            return hit
        lefts = self.left.cast_delivery(state.left, msg, dests)
        if lefts:
            rights = self.right.cast_delivery(state.right, msg, dests)
            out = frozenset(SubnetS(l, r) for l in lefts for r in rights)
        else:
            out = EMPTY
        if len(self._cast_memo) < _MEMO_CAP:
            self._cast_memo[mkey] = out
        return out


class ClosedAutomaton(NetAutomaton):
    """Top layer: casts become internal, arrivals are forbidden."""

    def __init__(self, net: NetAutomaton):
        self.net = net
        self.addresses = net.addresses
        self.init = net.init

    def rich_steps(self, state, menu: NetMenu = EMPTY_MENU) -> tuple:
        inner_menu = NetMenu(EMPTY, menu.newpkts, menu.links)
        out = []
        for r in self.net.rich_steps(state, inner_menu):
            if isinstance(r.action, ArriveA):  # pragma: no cover - none generated
                continue
            if isinstance(r.action, CastA):
                out.append(RichStep(r.origin, r.detail, TAU, r.target))
            else:
                out.append(r)
        return tuple(out)


def network_node(ip: int, inner: Automaton, nbrs: frozenset) -> NodeAutomaton:
    return NodeAutomaton(ip, inner, frozenset(nbrs))


def subnet(left: NetAutomaton, right: NetAutomaton) -> SubnetAutomaton:
    return SubnetAutomaton(left, right)


def closed(net: NetAutomaton) -> ClosedAutomaton:
    return ClosedAutomaton(net)

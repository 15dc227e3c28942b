"""Message types exchanged by the protocol.

``Newpkt`` is the client-layer injection asking a node to get a datum
to a destination; everything else travels between nodes.  The two extra
route-request shapes belong to protocol variants: one drops the request
identifier and keys duplicate suppression on the originator's sequence
number instead, the other carries a flag recording whether some node on
the path already answered the request.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .canon import FrozenMap, value_key


@dataclass(frozen=True)
class Newpkt:
    data: Any
    dip: int

    is_newpkt = True

    def canon_key(self) -> tuple:
        return ("m.new", value_key(self.data), self.dip)


@dataclass(frozen=True)
class Pkt:
    data: Any
    dip: int
    sip: int

    def canon_key(self) -> tuple:
        return ("m.pkt", value_key(self.data), self.dip, self.sip)


@dataclass(frozen=True)
class Rreq:
    hops: int
    rreqid: int
    dip: int
    dsn: int
    dsk: str
    oip: int
    osn: int
    sip: int

    def canon_key(self) -> tuple:
        return ("m.rreq", self.hops, self.rreqid, self.dip, self.dsn,
                self.dsk, self.oip, self.osn, self.sip)


@dataclass(frozen=True)
class RreqNoId:
    hops: int
    dip: int
    dsn: int
    dsk: str
    oip: int
    osn: int
    sip: int

    def canon_key(self) -> tuple:
        return ("m.rreqni", self.hops, self.dip, self.dsn, self.dsk,
                self.oip, self.osn, self.sip)


@dataclass(frozen=True)
class RreqFlagged:
    hops: int
    rreqid: int
    dip: int
    dsn: int
    dsk: str
    oip: int
    osn: int
    sip: int
    handled: bool

    def canon_key(self) -> tuple:
        return ("m.rreqfl", self.hops, self.rreqid, self.dip, self.dsn,
                self.dsk, self.oip, self.osn, self.sip, self.handled)


@dataclass(frozen=True)
class Rrep:
    hops: int
    dip: int
    dsn: int
    oip: int
    sip: int

    def canon_key(self) -> tuple:
        return ("m.rrep", self.hops, self.dip, self.dsn, self.oip, self.sip)


@dataclass(frozen=True)
class Rerr:
    dests: FrozenMap  # destination -> sequence number reported unreachable
    sip: int

    def canon_key(self) -> tuple:
        return ("m.rerr", self.dests.canon_key(), self.sip)


RREQ_KINDS = (Rreq, RreqNoId, RreqFlagged)

"""Named protocol variants and error-seeding mutations.

Each variant is a :class:`~aodvcheck.protocol.VariantConfig` toggling
one behavioural choice in the process bodies:

* ``base``       the reference protocol
* ``no-rreqid``  route requests carry no request id; duplicates are
                 recognized by (originator, originator seqno) instead
* ``fwd-rrep``   intermediate nodes forward every route reply, not just
                 ones that improved their own table
* ``bcast-rerr`` no precursor bookkeeping; route errors go out as plain
                 broadcasts
* ``fwd-rreq``   even nodes that answer a request keep forwarding it,
                 marked handled so nobody answers twice

Mutations deliberately break the protocol and exist so the monitor has
something to catch; they are applied on top of a variant.
"""
from __future__ import annotations

from dataclasses import replace

from .protocol import BASE, VariantConfig

VARIANTS = {
    "base": BASE,
    "no-rreqid": VariantConfig(name="no-rreqid", use_rreq_id=False),
    "fwd-rrep": VariantConfig(name="fwd-rrep", forward_all_rreps=True),
    "bcast-rerr": VariantConfig(name="bcast-rerr", use_precursors=False),
    "fwd-rreq": VariantConfig(name="fwd-rreq", forward_handled_rreqs=True),
}

MUTATIONS = ("accept-stale-update",)


class VariantError(ValueError):
    pass


def get_variant(name: str) -> VariantConfig:
    try:
        return VARIANTS[name]
    except KeyError:
        known = ", ".join(sorted(VARIANTS))
        raise VariantError(f"unknown variant {name!r} (known: {known})") from None


def apply_mutations(cfg: VariantConfig, mutations) -> VariantConfig:
    for m in mutations:
        if m == "accept-stale-update":
            cfg = replace(cfg, accept_stale_update=True)
        else:
            known = ", ".join(MUTATIONS)
            raise VariantError(f"unknown mutation {m!r} (known: {known})")
    return cfg

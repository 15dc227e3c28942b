"""Seeded simulation runs, schedules, and the trace file format."""
from dataclasses import replace

import pytest

from aodvcheck.awn import ConnectA, DisconnectA, NewpktA, TAU
from aodvcheck.canon import digest, value_key
from aodvcheck.messages import Rreq
from aodvcheck.simulate import Schedule, ScheduleError, run, schedule
from aodvcheck.network import tree_of
from aodvcheck.protocol import BASE
from aodvcheck.trace import (TRACE_FORMAT, dump_record, load_trace,
                             render_action, write_trace)

PAIR = tree_of([(1, [2]), (2, [1])])
CHAIN = tree_of([(1, [2]), (2, [1, 3]), (3, [2])])


def pair_schedule(seed=0, max_steps=120):
    return schedule(seed=seed, max_steps=max_steps,
                    events={0: ("newpkt", 1, "x", 2),
                            1: ("newpkt", 2, "y", 1)})


def trace_bytes(result) -> str:
    return "\n".join(dump_record(r) for r in result.records)


class TestScheduleBuilder:
    def test_specs_parse_to_actions(self):
        sched = schedule(events={0: ("newpkt", 1, "x", 2),
                                 3: ("disconnect", 1, 2),
                                 5: ("connect", 1, 2)})
        assert sched.events[0] == NewpktA(1, "x", 2)
        assert sched.events[3] == DisconnectA(1, 2)
        assert sched.events[5] == ConnectA(1, 2)

    def test_action_objects_pass_through(self):
        sched = schedule(events={2: NewpktA(1, "x", 2)})
        assert sched.events[2] == NewpktA(1, "x", 2)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ScheduleError, match="teleport"):
            schedule(events={0: ("teleport", 1, 2)})

    def test_defaults(self):
        sched = schedule()
        assert sched == Schedule(0, 200, sched.events)
        assert not len(sched.events)


class TestDeterminism:
    def test_same_seed_gives_identical_bytes(self):
        a = run(PAIR, pair_schedule(seed=0))
        b = run(PAIR, pair_schedule(seed=0))
        assert trace_bytes(a) == trace_bytes(b)
        assert a.holds and b.holds

    def test_seeds_actually_matter(self):
        a = run(PAIR, pair_schedule(seed=0))
        b = run(PAIR, pair_schedule(seed=1))
        assert trace_bytes(a) != trace_bytes(b)


class TestRunOutcomes:
    def test_quiescent_run_delivers_payload(self):
        res = run(PAIR, pair_schedule())
        assert res.stop == "quiescent"
        assert res.holds
        assert any(ip == 2 and data == "x" for _, ip, data in res.delivered)
        assert any(ip == 1 and data == "y" for _, ip, data in res.delivered)

    def test_final_record_matches_result(self):
        res = run(PAIR, pair_schedule())
        last = res.records[-1]
        assert last["final"] == digest(value_key(res.final_state))
        assert last["stop"] == "quiescent"
        assert last["holds"] is True
        assert last["delivered"] == [list(d) for d in res.delivered]

    def test_header_record(self):
        res = run(PAIR, pair_schedule(seed=3), scenario_name="pair")
        head = res.records[0]
        assert head["format"] == TRACE_FORMAT
        assert head["kind"] == "simulate"
        assert head["scenario"] == "pair"
        assert head["variant"] == "base"
        assert head["seed"] == 3
        assert head["nodes"] == [[1, [2]], [2, [1]]]
        assert "loop-freedom" in head["suites"]

    def test_quiescence_fast_forwards_to_next_event(self):
        sched = schedule(seed=0, max_steps=600,
                         events={0: ("newpkt", 1, "x", 2),
                                 500: ("disconnect", 1, 2)})
        res = run(PAIR, sched)
        assert res.stop == "quiescent"
        assert res.pending_events == ()
        assert any(r.get("action") == "disconnect(1, 2)"
                   for r in res.records if "action" in r)

    def test_max_steps_reports_pending_events(self):
        sched = schedule(seed=0, max_steps=3,
                         events={0: ("newpkt", 1, "x", 2),
                                 100: ("disconnect", 1, 2)})
        res = run(PAIR, sched)
        assert res.stop == "max-steps"
        assert res.steps == 3
        assert res.pending_events == ((100, DisconnectA(1, 2)),)

    def test_impossible_event_raises(self):
        sched = schedule(events={0: ("newpkt", 9, "x", 1)})
        with pytest.raises(ScheduleError, match="cannot fire at step 0"):
            run(PAIR, sched)

    def test_suite_selection(self):
        res = run(PAIR, pair_schedule(), suites=["loop-freedom"])
        assert res.records[0]["suites"] == ["loop-freedom"]
        assert res.holds


class TestViolationStop:
    # under the stale-accepting update, this seed walks node 2 into
    # advertising destination 3 with a regressed net sequence number
    def broken_run(self, **kw):
        cfg = replace(BASE, accept_stale_update=True)
        sched = schedule(seed=4, max_steps=400,
                         events={0: ("newpkt", 1, "d", 3),
                                 1: ("newpkt", 3, "d", 1),
                                 40: ("disconnect", 1, 2),
                                 80: ("connect", 1, 2)})
        return run(CHAIN, sched, cfg, **kw)

    def test_violation_recorded_and_stops(self):
        res = self.broken_run()
        assert not res.holds
        assert res.stop == "violation"
        assert res.verdict.suite == "nsqn-monotone"
        assert res.verdict.witness == (2, 3, 2, 0)
        vio = [r for r in res.records if "violation" in r]
        assert len(vio) == 1
        assert vio[0]["violation"]["suite"] == "nsqn-monotone"
        assert res.records[-1]["holds"] is False

    def test_same_schedule_is_clean_without_the_mutation(self):
        sched = schedule(seed=4, max_steps=400,
                         events={0: ("newpkt", 1, "d", 3),
                                 1: ("newpkt", 3, "d", 1),
                                 40: ("disconnect", 1, 2),
                                 80: ("connect", 1, 2)})
        res = run(CHAIN, sched, BASE)
        assert res.holds and res.stop == "quiescent"


class TestSigmaDump:
    def test_step_records_carry_tables(self):
        res = run(PAIR, pair_schedule(max_steps=30), dump_sigma=True)
        steps = [r for r in res.records if "action" in r]
        assert steps
        for rec in steps:
            assert set(rec["sigma"]) == {"1", "2"}
            assert "sn" in rec["sigma"]["1"]
        assert "sigma" in res.records[-1]

    def test_sigma_rt_rows_are_plain_json(self):
        res = run(PAIR, pair_schedule(), dump_sigma=True)
        final_rt = res.records[-1]["sigma"]["1"]["rt"]
        assert final_rt["2"]["flag"] == "val"
        assert isinstance(final_rt["2"]["hops"], int)


class TestTraceFiles:
    def test_round_trip(self, tmp_path):
        res = run(PAIR, pair_schedule(), dump_sigma=True)
        path = tmp_path / "t.ndjson"
        write_trace(path, res.records)
        assert load_trace(path) == res.records

    def test_records_are_single_lines(self, tmp_path):
        res = run(PAIR, pair_schedule())
        path = tmp_path / "t.ndjson"
        write_trace(path, res.records)
        lines = path.read_text().splitlines()
        assert len(lines) == len(res.records)

    def test_digest_is_hex(self):
        res = run(PAIR, pair_schedule())
        step = next(r for r in res.records if "digest" in r)
        assert len(step["digest"]) == 32
        int(step["digest"], 16)


class TestRenderAction:
    def test_common_shapes(self):
        assert render_action(TAU) == "tau"
        assert render_action(NewpktA(1, "x", 2)) == "newpkt(1, 'x', 2)"
        assert render_action(ConnectA(1, 2)) == "connect(1, 2)"
        assert render_action(DisconnectA(2, 3)) == "disconnect(2, 3)"

    def test_messages_are_embedded(self):
        from aodvcheck.awn import CastA
        msg = Rreq(0, 1, 2, 0, "unk", 1, 1, 1)
        text = render_action(CastA(frozenset([2]), msg))
        assert text.startswith("cast([2], ")
        assert "Rreq" in text

    def test_unknown_action_rejected(self):
        with pytest.raises(TypeError):
            render_action(object())

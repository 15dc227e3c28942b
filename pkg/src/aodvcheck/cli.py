"""Command-line front end.

Three subcommands share the scenario format: ``explore`` runs the
bounded explorer and writes a counterexample when a suite fails,
``simulate`` runs a seeded schedule and writes an NDJSON trace, and
``graph`` re-runs a simulation to dump per-destination routing graphs,
optionally validating a previously written trace against it.

Exit codes: 0 all checks passed (a reported depth-bound truncation
still exits 0), 1 a suite was violated, 2 usage or scenario errors,
3 the state cap was hit.
"""
from __future__ import annotations

import argparse
import json
import sys

from .canon import digest, value_key
from .explore import ResourceCapError, check_theorem1, default_threads
from .monitor import ALL_SUITES, SuiteError, rt_graph, split_suites
from .network import net_data, tree_addresses
from .scenario import Scenario, ScenarioError, load_scenario
from .simulate import Schedule, ScheduleError, run
from .trace import dump_record, load_trace, write_trace
from .variants import VariantError, apply_mutations, get_variant

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_CAP = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="aodvcheck",
        description="check AODV route discovery on small networks")
    sub = p.add_subparsers(dest="command", required=True)

    names = ", ".join(sorted(ALL_SUITES))
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file")
    common.add_argument("--variant", help="override the scenario's variant")
    common.add_argument("--suite",
                        help=f"comma-separated suites (default all: {names})")
    common.add_argument("--out", help="output file")

    e = sub.add_parser("explore", parents=[common],
                       help="bounded exhaustive exploration with invariants")
    e.add_argument("--bound", type=int, help="depth bound (layers)")
    e.add_argument("--state-cap", type=int, default=None,
                   help="abort after this many stored states")
    e.add_argument("--threads", type=int, default=None,
                   help="worker threads (default AWN_AODV_THREADS or 1)")

    s = sub.add_parser("simulate", parents=[common],
                       help="seeded random run under the scenario schedule")
    s.add_argument("--seed", type=int, help="override the schedule seed")
    s.add_argument("--steps", type=int, help="override the schedule length")
    s.add_argument("--dump-sigma", action="store_true",
                   help="include node state in every trace record")

    g = sub.add_parser("graph", parents=[common],
                       help="dump routing-table graphs from a simulation run")
    g.add_argument("--seed", type=int, help="override the schedule seed")
    g.add_argument("--steps", type=int, help="override the schedule length")
    g.add_argument("--dip", type=int, action="append",
                   help="destination to graph (repeatable; default all)")
    g.add_argument("--trace", help="validate this trace against the re-run")
    return p


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.variant is not None:
        cfg = get_variant(args.variant)
        # keep any mutations the scenario asked for
        if sc.cfg.accept_stale_update:
            cfg = apply_mutations(cfg, ["accept-stale-update"])
        sc = Scenario(sc.name, sc.tree, cfg, sc.env, sc.sched,
                      sc.suites, sc.bound)
    if args.suite is not None:
        names = tuple(n for n in args.suite.split(",") if n)
        split_suites(names)
        sc = Scenario(sc.name, sc.tree, sc.cfg, sc.env, sc.sched,
                      names, sc.bound)
    return sc


def _json_steps(steps) -> list:
    return [{"origin": st.origin, "action": st.action,
             "digest": st.digest, "key": _listify(st.key)}
            for st in steps]


def _listify(x):
    if isinstance(x, tuple):
        return [_listify(v) for v in x]
    return x


def _cmd_explore(args) -> int:
    sc = _load(args)
    bound = args.bound if args.bound is not None else sc.bound
    threads = args.threads if args.threads is not None else default_threads()
    kwargs = dict(suites=sc.suites, bound=bound, threads=threads)
    if args.state_cap is not None:
        kwargs["state_cap"] = args.state_cap
    print(f"scenario: {sc.name} (variant {sc.cfg.name})")
    try:
        rep = check_theorem1(sc.tree, sc.env, sc.cfg, **kwargs)
    except ResourceCapError as e:
        rep = e.report
        print(f"states: {rep.states}  transitions: {rep.transitions}  "
              f"depth: {rep.depth}")
        print(f"state cap hit: {e}", file=sys.stderr)
        return EXIT_CAP
    print(f"states: {rep.states}  transitions: {rep.transitions}  "
          f"depth: {rep.depth}")
    if rep.complete:
        print("exploration complete")
    elif rep.counterexamples:
        print("exploration stopped at first violating layer")
    else:
        print(f"exploration truncated at depth bound {bound} "
              "(all checks passed within it)")
    print("suites:", " ".join(rep.suites))
    if rep.holds:
        print("result: PASS")
        return EXIT_PASS
    cx = min(rep.counterexamples, key=lambda c: (c.depth, c.suite))
    print(f"result: FAIL ({len(rep.counterexamples)} counterexample(s))")
    print(f"violated: {cx.suite} ({cx.kind}) at depth {cx.depth}")
    print(f"witness: {cx.witness}")
    out = args.out or f"{sc.name}.cx.json"
    doc = {"format": "aodvcheck-cx-1", "scenario": sc.name,
           "variant": sc.cfg.name, "suite": cx.suite, "kind": cx.kind,
           "witness": _listify(cx.witness), "depth": cx.depth,
           "digest": cx.digest, "steps": _json_steps(cx.steps)}
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"counterexample: {out} ({cx.depth} step(s))")
    return EXIT_VIOLATION


def _run_schedule(sc: Scenario, args, dump_sigma=False):
    if sc.sched is None:
        raise ScenarioError("scenario has no 'schedule' section")
    sched = sc.sched
    if getattr(args, "seed", None) is not None:
        sched = Schedule(args.seed, sched.max_steps, sched.events)
    if getattr(args, "steps", None) is not None:
        sched = Schedule(sched.seed, args.steps, sched.events)
    return run(sc.tree, sched, sc.cfg, suites=sc.suites,
               dump_sigma=dump_sigma, scenario_name=sc.name), sched


def _cmd_simulate(args) -> int:
    sc = _load(args)
    res, sched = _run_schedule(sc, args, dump_sigma=args.dump_sigma)
    print(f"scenario: {sc.name} (variant {sc.cfg.name}) seed {sched.seed}")
    print(f"steps: {res.steps}  stop: {res.stop}")
    for at, ip, data in res.delivered:
        print(f"delivered: {data!r} at node {ip} (step {at})")
    if res.pending_events:
        print(f"pending events: {len(res.pending_events)} never fired")
    if args.out:
        write_trace(args.out, res.records)
        print(f"trace: {args.out}")
    if res.holds:
        print("result: PASS")
        return EXIT_PASS
    v = res.verdict
    print(f"result: FAIL\nviolated: {v.suite}\nwitness: {v.witness}")
    return EXIT_VIOLATION


def _cmd_graph(args) -> int:
    sc = _load(args)
    res, sched = _run_schedule(sc, args)
    sigma = net_data(res.final_state)
    nodes = frozenset(tree_addresses(sc.tree))
    dips = args.dip or sorted({d for data in sigma.values()
                               for d in data.rt})
    graphs = {}
    for dip in dips:
        g = rt_graph(sigma, dip, nodes)
        graphs[str(dip)] = sorted([a, b] for a, b in g.arcs)
    final = digest(value_key(res.final_state))
    doc = {"scenario": sc.name, "variant": sc.cfg.name, "seed": sched.seed,
           "final": final, "graphs": graphs}
    if args.trace:
        recorded = None
        for rec in load_trace(args.trace):
            if "final" in rec:
                recorded = rec["final"]
        doc["trace_final"] = recorded
        if recorded != final:
            print(dump_record(doc))
            print("error: trace does not match the re-run "
                  f"({recorded} != {final})", file=sys.stderr)
            return EXIT_VIOLATION
        doc["validated"] = True
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"graphs: {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_PASS


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "explore":
            return _cmd_explore(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_graph(args)
    except (ScenarioError, ScheduleError, SuiteError, VariantError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

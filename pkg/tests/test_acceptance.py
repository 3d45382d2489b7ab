"""Acceptance criteria 1-8, one PASS/FAIL line each.

The lines are printed in the pytest terminal summary and also when this
file is run directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

from dataclasses import replace

import pytest

from rasill.analysis import PRESETS, ClientScript, client_potential, ell1, ell2
from rasill.core import Const, Metric, TVar, clog, eval_pot, unfold
from rasill.corpus import CORPUS_FILES, NEGATIVE, all_scripts, client_program, corpus_text, load
from rasill.errors import NegativePotential
from rasill.monitor import bound_report, check_monotone, deep_check
from rasill.parser import parse_program, pretty_program
from rasill.runtime import RandomScheduler, RoundRobin, Trace, run, totals
from rasill.typechecker import check_signature, min_potential

STD = Metric.standard()
RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    assert ok, detail


def work(trace: Trace) -> int:
    return totals(trace.final)[0]


def test_1_corpus_typechecking():
    positives = [f for f in CORPUS_FILES if f not in NEGATIVE and f != "empty"]
    failed = {f: check_signature(load(f), STD, 64).failures() for f in positives}
    bad = {f: len(v) for f, v in failed.items() if v}
    counter = check_signature(load("counter"), STD, 64)
    grid = {(e.def_name, tuple(e.indices.values())) for e in counter.entries}
    grid_ok = all(("b0", (n,)) in grid for n in range(1, 65)) and all(
        ("b1", (n,)) in grid for n in range(65)) and ("e", ()) in grid
    b1 = check_signature(load("bad_b1"), STD, 64).first_failure
    bq = check_signature(load("bad_queue"), STD, 64).first_failure
    neg_ok = (b1 is not None and b1.failed_inequality == "0+1 >= 1+1+0"
              and bq is not None and bq.failed_inequality == "0+0+0 >= 0+1+1")
    record(1, not bad and grid_ok and neg_ok,
           f"{len(positives)} files, failures {bad or 0}; "
           f"bad_b1 rejected by '{b1 and b1.failed_inequality}' (1 >= 2 false), "
           f"bad_queue rejected by '{bq and bq.failed_inequality}'")


def test_2_counter_bounds():
    sig = load("counter")
    val = run(sig, "counter_val5")
    annotation = eval_pot(unfold(TVar("ctr", (Const(5),)), sig).branch("val")[0])
    bound = 2 * clog(5) + 2
    inc = run(sig, "counter_inc8")
    rep = bound_report(inc)
    trailing = sum(len(bin(k)) - len(bin(k).rstrip("1")) for k in range(8))
    ok = (work(val) == annotation == bound == 8 and val.status == "done"
          and (rep.initial_potential, rep.final_work, rep.slack) == (8, 7, 1) and trailing == 7)
    record(2, ok, f"val at 5: work {work(val)} = bound {bound} (slack {bound - work(val)}); "
                  f"8 incs: work {rep.final_work} vs potential {rep.initial_potential} "
                  f"(slack {rep.slack}, trailing-ones oracle {trailing})")


def test_3_stack_and_queue_tightness():
    m, n = 3, 0
    stack = work(run(load("stack"), "stack_l1_3"))
    l1 = work(run(load("clients"), "queue_l1_3"))
    l2 = work(run(load("clients"), "queue_l2_3"))
    phi = client_potential(PRESETS["stack"](), ell1(m))
    ok = (stack == phi == 6 and l1 == 2 * m * n + m * (m - 1) + 2 * m == 12
          and l2 == 2 * m * (n + 1) == 6)
    record(3, ok, f"stack {stack} = {phi}; queue l1 {l1} = 12; queue l2 {l2} = 6")


def test_4_functional_queue_amortization():
    trace = run(load("fqueue"), "fq_l1_4")
    w, cap = work(trace), 6 * 4 + 2 * 4
    record(4, w < cap and bound_report(trace).initial_potential == cap,
           f"work {w} < {cap} (amortized slack {cap - w})")


RUNS = [("counter", "counter_val5"), ("counter", "counter_inc8"), ("stack", "stack_l1_3"),
        ("fqueue", "fq_l1_4"), ("clients", "queue_l1_3"), ("clients", "queue_l2_3"),
        ("clients", "queue_l1_3_from2"), ("clients", "queue_l2_3_from2"), ("list", "nil_demo"),
        ("list", "append_demo"), ("fold", "fold_demo")]


def test_5_soundness_monotonicity():
    checked, problems = 0, []
    for file, main in RUNS:
        sig = load(file)
        for seed in (None, 1, 2, 3, 4, 5):
            sched = RoundRobin() if seed is None else RandomScheduler(seed)
            try:
                trace = run(sig, main, sched)
            except NegativePotential as exc:
                problems.append(f"{main}/{seed}: {exc}")
                continue
            if not check_monotone(trace) or not bound_report(trace).holds:
                problems.append(f"{main}/{seed}: weight")
            deep_check(sig, trace, STD)
            checked += 1
    trace = run(load("stack"), "stack_l1_3")
    bumped = [replace(ev, weight=ev.weight + 1) if ev.step >= 4 else ev for ev in trace.events]
    fault = check_monotone(replace(trace, events=bumped))
    caught = not fault and fault.step == 4
    record(5, not problems and caught,
           f"{checked} runs monotone and retyped at every step; injected fault flagged at step "
           f"{getattr(fault, 'step', None)}" + (f"; problems {problems}" if problems else ""))


def test_6_oracle_equivalence():
    counts, mismatches = {}, []
    for store in ("stack", "queue"):
        ann = PRESETS[store]()
        counts[store] = 0
        for ops in all_scripts(8):
            sc = ClientScript(ops)
            measured = work(run(client_program(store, sc), "client"))
            if measured != client_potential(ann, sc):
                mismatches.append((store, ops))
            counts[store] += 1
    record(6, not mismatches and min(counts.values()) >= 2**8,
           f"{counts} scripts of length <= 8, {len(mismatches)} mismatches")


def test_7_min_potential():
    got = {
        "nil": min_potential(load("list"), "nil", {}, STD),
        "cons(list0)": min_potential(load("list"), "cons", {}, STD),
        "cons(list1)": min_potential(load("list"), "cons1", {}, STD),
        "empty(stack)": min_potential(load("stack"), "stack_empty", {}, STD),
        "b1(n=0)": min_potential(load("counter"), "b1", {"n": 0}, STD),
        "e": min_potential(load("counter"), "e", {}, STD),
    }
    want = {"nil": 2, "cons(list0)": 2, "cons(list1)": 3, "empty(stack)": 0, "b1(n=0)": 1, "e": 0}
    record(7, got == want, ", ".join(f"{k}={v}" for k, v in got.items()))


def test_8_parser_roundtrip():
    bad = []
    for name in CORPUS_FILES:
        sig = parse_program(corpus_text(name))
        if parse_program(pretty_program(sig)) != sig:
            bad.append(name)
    record(8, not bad, f"{len(CORPUS_FILES)} corpus files, differing: {bad or 'none'}")


def report_lines() -> list[str]:
    lines = []
    for n in range(1, 9):
        ok, detail = RESULTS.get(n, (False, "not run"))
        lines.append(f"acceptance {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return lines


if __name__ == "__main__":
    for n, fn in sorted((int(k.split("_")[1]), v) for k, v in dict(globals()).items()
                        if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            pass
    print("\n".join(report_lines()))

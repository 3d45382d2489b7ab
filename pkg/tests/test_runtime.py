from __future__ import annotations

import pytest

from rasill.core import Metric
from rasill.corpus import corpus_text
from rasill.errors import MainNotClosed, NegativePotential, NoSuchMain
from rasill.parser import parse_program
from rasill.runtime import (
    CloseMsg, FwdMsg, MsgPred, RandomScheduler, RoundRobin, enabled, init_config, run, step, totals,
    weight,
)

STD = Metric.standard()

EXTRA = """
proc costfree one_inc [] |2| () -> (d : ctr[2]) =
  t <- spawn e[](); s <- spawn b1[0](t); s.inc; fwd d s
proc costfree short_inc [] |1| () -> (d : ctr[2]) =
  t <- spawn e[](); s <- spawn b1[0](t); s.inc; fwd d s
proc closer [] |1| () -> (d : 1^0) = close d
proc costfree pot_main [] |clog(4) + 1| () -> (d : 1^0) = close d
proc idle_main [] |0| () -> (s : ctr[0]) =
  case s {
    inc => t <- spawn e[](); b1[0](t)
  | val => s.dollar; close s
  }
"""


@pytest.fixture(scope="module")
def sig():
    return parse_program(corpus_text("counter") + EXTRA)


def test_init_config(sig):
    cfg = init_config(sig, "counter_val5")
    (p,) = cfg.preds.values()
    assert (p.work, p.potential, p.provides) == (0, 10, cfg.root)
    assert weight(cfg) == 10 and totals(cfg) == (0, 10)
    assert init_config(sig, "pot_main").preds[0].potential == 4


def test_init_config_errors(sig):
    with pytest.raises(NoSuchMain):
        init_config(sig, "nope")
    with pytest.raises(MainNotClosed):
        init_config(sig, "reader")
    with pytest.raises(MainNotClosed):
        init_config(sig, "b1")


def test_enabled_shapes(sig):
    cfg = init_config(sig, "idle_main")
    assert enabled(cfg) == []
    cfg = init_config(sig, "one_inc")
    for _ in range(2):
        cfg, _ = step(cfg, enabled(cfg)[0], STD)
    assert [i.rule for i in enabled(cfg)] == ["withC_s"]
    cfg, _ = step(cfg, enabled(cfg)[0], STD)
    assert "withC_r" in [i.rule for i in enabled(cfg)]


def _pred_by_def(cfg, name):
    return next(p for p in cfg.procs() if p.def_name == name)


def test_b1_receives_and_pays(sig):
    trace = run(sig, "one_inc")
    configs = list(trace.configs())
    rules = [e.rule for e in trace.events]
    recv = rules.index("withC_r")
    b1 = _pred_by_def(configs[recv + 1], "b1")
    assert (b1.potential, b1.work) == (2, 0)
    send = rules.index("withC_s", recv)
    after = configs[send + 1].preds[trace.instances[send].actor]
    assert (after.potential, after.work) == (0, 1)
    assert trace.events[send].work_delta == 1


def test_fwd_preserves_work_and_weight(sig):
    trace = run(sig, "counter_val5")
    configs = list(trace.configs())
    for k, ev in enumerate(trace.events):
        if ev.rule == "fwd_s":
            before = configs[k].preds[trace.instances[k].actor]
            after = configs[k + 1].preds[before.pid]
            assert isinstance(after, MsgPred) and isinstance(after.payload, FwdMsg)
            assert after.work == before.work and after.potential == 0


def test_close_costs_one(sig):
    trace = run(sig, "closer")
    assert trace.status == "done"
    assert [e.rule for e in trace.events] == ["oneC_s", "oneC_r"]
    msg = list(trace.configs())[1].preds[0]
    assert isinstance(msg.payload, CloseMsg) and (msg.work, msg.potential) == (1, 0)
    assert trace.summary()["totalWork"] == 1


def test_negative_potential_detected(sig):
    with pytest.raises(NegativePotential):
        run(sig, "short_inc")


def test_statuses(sig):
    assert run(sig, "counter_val5").status == "done"
    assert run(sig, "idle_main").status == "idle"
    assert run(sig, "counter_inc8", max_steps=3).status == "budget"
    stuck = parse_program("type t = 1^0\nproc m [] |0| () -> (d : t) = x <- spawn m[](); wait x; close d")
    assert run(stuck, "m", max_steps=50).status in ("budget", "stuck")
    with pytest.raises(ValueError):
        run(sig, "closer", max_steps=0)


def test_counter_work(sig):
    val = run(sig, "counter_val5")
    assert totals(val.final) == (8, 0)
    inc = run(sig, "counter_inc8")
    assert (inc.status, *totals(inc.final)) == ("idle", 7, 1)


def test_costfree_senders_pay_nothing(sig):
    trace = run(sig, "pot_main")
    assert trace.summary()["totalWork"] == 0


def test_metric_scales_work(sig):
    trace = run(sig, "closer", metric=Metric(1, 1, 0))
    assert trace.summary()["totalWork"] == 0


@pytest.mark.parametrize(
    "file, main, work",
    [("stack", "stack_l1_3", 6), ("clients", "queue_l1_3", 12), ("clients", "queue_l2_3", 6),
     ("list", "nil_demo", 2), ("list", "append_demo", 14), ("fold", "fold_demo", 13)],
)
def test_corpus_work_is_schedule_independent(corpus, file, main, work):
    sig = corpus(file)
    assert run(sig, main).summary()["totalWork"] == work
    for seed in range(1, 6):
        assert run(sig, main, RandomScheduler(seed)).summary()["totalWork"] == work


def test_round_robin_is_reproducible(corpus):
    a = run(corpus("stack"), "stack_l1_3", RoundRobin()).to_jsonl()
    b = run(corpus("stack"), "stack_l1_3", RoundRobin()).to_jsonl()
    assert a == b
    c = run(corpus("stack"), "stack_l1_3", RandomScheduler(7)).to_jsonl()
    d = run(corpus("stack"), "stack_l1_3", RandomScheduler(7)).to_jsonl()
    assert c == d


SEND_RULES = {"plusC_s", "withC_s", "tensorC_s", "lolliC_s", "oneC_s"}


@pytest.mark.parametrize("file, main", [("counter", "counter_inc8"), ("fqueue", "fq_l1_4"),
                                        ("fold", "fold_demo")])
def test_step_invariants(corpus, file, main):
    trace = run(corpus(file), main, RandomScheduler(3))
    configs = list(trace.configs())
    for k, ev in enumerate(trace.events):
        if ev.rule in SEND_RULES:
            assert weight(configs[k + 1]) == weight(configs[k])
        cfg = configs[k + 1]
        carriers = [m.provides for m in cfg.msgs()]
        assert len(carriers) == len(set(carriers))
        for p in cfg.procs():
            assert p.potential >= 0


def test_trace_json_lines(corpus):
    import json

    trace = run(corpus("list"), "nil_demo")
    lines = [json.loads(x) for x in trace.to_jsonl().splitlines()]
    assert set(lines[0]) == {"step", "rule", "channels", "workDelta", "potDelta", "weight"}
    assert lines[-1] == {"status": "done", "totalWork": 2, "totalPotential": 0, "steps": len(lines) - 1}


def test_empty_config_totals(corpus):
    cfg = init_config(corpus("list"), "nil_demo").copy()
    cfg.preds.clear()
    assert totals(cfg) == (0, 0)

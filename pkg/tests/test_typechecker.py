from __future__ import annotations

import pytest

from rasill.core import Metric
from rasill.errors import SessionTypeError, Untypeable
from rasill.parser import parse_program
from rasill.runtime import RoundRobin, init_config, step, enabled
from rasill.typechecker import (
    check_def, check_signature, domain_samples, min_potential, typecheck_config,
)

STD = Metric.standard()


def test_b1_at_zero(corpus):
    sig = corpus("counter")
    d = check_def(sig, sig.proc_defs["b1"], STD, {"n": 0})
    assert d.potential == 1
    assert all(s.after >= 0 for s in d.steps)
    # the inc branch receives 1, pays 1+1 upstream and spawns b0 storing 0
    inc = [s for s in d.steps if "case s:inc" in s.path]
    assert (inc[0].rule, inc[0].before, inc[0].after) == ("&L", 2, 0)
    assert inc[1].rule == "spawn" and inc[1].inequality == "0 >= 0+0"


def test_b1_without_potential_fails_with_exact_inequality(corpus):
    sig = corpus("counter")
    with pytest.raises(SessionTypeError) as info:
        check_def(sig, sig.proc_defs["b1"], STD, {"n": 0}, potential=0)
    err = info.value
    assert err.kind == "InsufficientPotential"
    assert err.inequality == "0+1 >= 1+1+0"
    assert "(1 < 2)" in str(err)


def test_e_needs_nothing(corpus):
    sig = corpus("counter")
    assert check_def(sig, sig.proc_defs["e"], STD).potential == 0
    assert min_potential(sig, "e", {}, STD) == 0


def test_b0_domain(corpus):
    sig = corpus("counter")
    with pytest.raises(SessionTypeError) as info:
        check_def(sig, sig.proc_defs["b0"], STD, {"n": 0})
    assert info.value.kind == "InsufficientPotential"
    assert "val" in info.value.location
    for n in range(1, 65):
        check_def(sig, sig.proc_defs["b0"], STD, {"n": n})


@pytest.mark.parametrize("name", ["counter", "stack", "queue", "fqueue", "clients", "list", "map", "fold"])
def test_corpus_signatures_check(corpus, name):
    report = check_signature(corpus(name), STD, 64)
    assert report.ok, report.first_failure
    assert report.to_json()["failed"] == 0


def test_queue_is_checked_across_its_family(corpus):
    report = check_signature(corpus("queue"), STD, 64)
    names = {(e.def_name, tuple(e.indices.values())) for e in report.entries}
    assert ("queue_elem", (64,)) in names and ("queue_elem", (0,)) not in names


def test_unknown_type_is_a_failure_entry():
    sig = parse_program("proc p [] |0| () -> (s : nope) = close s", validate=False)
    report = check_signature(sig, STD)
    assert not report.ok
    assert report.first_failure.kind == "UnknownType"


def test_negative_fixtures(corpus):
    first = check_signature(corpus("bad_b1"), STD).first_failure
    assert first.failed_inequality == "0+1 >= 1+1+0"
    first = check_signature(corpus("bad_queue"), STD).first_failure
    assert (first.def_name, first.kind) == ("queue_elem", "InsufficientPotential")
    assert first.failed_inequality == "0+0+0 >= 0+1+1"


@pytest.mark.parametrize(
    "file, name, expected",
    [("list", "nil", 2), ("list", "cons", 2), ("list", "cons1", 3), ("stack", "stack_empty", 0),
     ("counter", "e", 0), ("list", "append", 0), ("fold", "fold", 0)],
)
def test_min_potential_examples(corpus, file, name, expected):
    assert min_potential(corpus(file), name, {}, STD) == expected


def test_min_potential_b1(corpus):
    assert min_potential(corpus("counter"), "b1", {"n": 0}, STD) == 1


def _all_instances(sig):
    for d in sig.proc_defs.values():
        for env in domain_samples(d, 8):
            yield d, env


@pytest.mark.parametrize("name", ["counter", "stack", "queue", "fqueue", "list", "fold"])
def test_min_potential_is_tight(corpus, name):
    sig = corpus(name)
    for d, env in _all_instances(sig):
        q = min_potential(sig, d.name, env, STD)
        check_def(sig, d, STD, env, potential=q)
        if q > 0:
            with pytest.raises(SessionTypeError):
                check_def(sig, d, STD, env, potential=q - 1)
        free = min_potential(sig, d.name, env, Metric.costfree())
        assert free <= q


@pytest.mark.parametrize("name", ["counter", "queue", "fqueue", "list"])
def test_residuals_never_negative(corpus, name):
    sig = corpus(name)
    for d, env in _all_instances(sig):
        for s in check_def(sig, d, STD, env).steps:
            assert s.before >= 0 and s.after >= 0


def _err(src: str) -> SessionTypeError:
    sig = parse_program("type item = 1^0\ntype two = +{ a^0 : 1^0 }\n" + src)
    d = list(sig.proc_defs.values())[-1]
    with pytest.raises(SessionTypeError) as info:
        check_def(sig, d, STD)
    return info.value


def test_error_kinds():
    assert _err("proc p [] |9| (x : item) -> (s : two) = s.b; wait x; close s").kind == "LabelNotInType"
    assert _err("proc p [] |9| (x : item) -> (s : two) = s.a; close s").kind == "LinearityViolation"
    assert _err("proc p [] |9| (x : two) -> (s : item) = wait x; close s").kind == "ContextMismatch"
    assert _err("proc p [] |9| () -> (s : two) = close s").kind == "WrongProvidedType"
    assert _err("proc p [] |9| (x : item) -> (s : two) = fwd s x").kind == "ContextMismatch"


def test_untypeable():
    sig = parse_program("type item = 1^0\nproc p [] |0| (x : item) -> (s : item) = close s")
    with pytest.raises(Untypeable):
        min_potential(sig, "p", {}, STD)


def test_typecheck_config_weights(corpus):
    sig = corpus("list")
    cfg = init_config(sig, "nil_demo")
    assert typecheck_config(sig, cfg, STD) == 2
    sched = RoundRobin()
    seen = set()
    while True:
        insts = enabled(cfg)
        if not insts:
            break
        inst = sched.choose(insts)
        seen.add(inst.rule)
        cfg, _ = step(cfg, inst, STD)
        typed = typecheck_config(sig, cfg, STD) + cfg.external_work + cfg.external_potential
        assert typed == 2
    assert "plusC_s" in seen


def test_empty_config_weighs_nothing(corpus):
    cfg = init_config(corpus("list"), "nil_demo")
    empty = cfg.copy()
    empty.preds.clear()
    assert typecheck_config(corpus("list"), empty, STD) == 0
